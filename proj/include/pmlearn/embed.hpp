#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/imaging.hpp"
#include "pmlearn/rng.hpp"

namespace pml {

using Descriptor = std::vector<float>;

// conv(5x5, 8) -> relu -> maxpool(2) -> conv(5x5, 16) -> relu -> maxpool(2)
// -> fc(64) -> relu -> fc(d, linear). float32 parameters, float64 reduction.
class EmbeddingNet {
  public:
    static constexpr int kConv1Filters = 8;
    static constexpr int kConv2Filters = 16;
    static constexpr int kKernel = 5;
    static constexpr int kFc1 = 64;

    EmbeddingNet() = default;

    EmbeddingNet(int input_size, int in_channels, int descriptor_dim) {
        if (descriptor_dim != 3 && descriptor_dim != 16 && descriptor_dim != 32) {
            throw config_error("descriptor dimension must be one of {3, 16, 32}");
        }
        if (in_channels < 1 || in_channels > 7) {
            throw config_error("input channels must be in [1, 7]");
        }
        input_size_ = input_size;
        in_channels_ = in_channels;
        d_ = descriptor_dim;
        // default hint: first modality with this channel count (callers
        // with an ambiguous count set it explicitly)
        for (Modality m : {Modality::rgb, Modality::d, Modality::n,
                           Modality::rgbd, Modality::nd, Modality::rgbn,
                           Modality::rgbdn}) {
            if (channel_count(modality_mask(m)) == in_channels) {
                modality_hint = m;
                break;
            }
        }
        s1_ = input_size - kKernel + 1;
        if (s1_ < 2 || s1_ % 2 != 0) {
            throw config_error("unsupported input size for conv stack");
        }
        p1_ = s1_ / 2;
        s2_ = p1_ - kKernel + 1;
        if (s2_ < 2 || s2_ % 2 != 0) {
            throw config_error("unsupported input size for conv stack");
        }
        p2_ = s2_ / 2;
        flat_ = kConv2Filters * p2_ * p2_;

        conv1_w.assign(static_cast<std::size_t>(kConv1Filters) * in_channels_ *
                           kKernel * kKernel, 0.f);
        conv1_b.assign(kConv1Filters, 0.f);
        conv2_w.assign(static_cast<std::size_t>(kConv2Filters) * kConv1Filters *
                           kKernel * kKernel, 0.f);
        conv2_b.assign(kConv2Filters, 0.f);
        fc1_w.assign(static_cast<std::size_t>(kFc1) * flat_, 0.f);
        fc1_b.assign(kFc1, 0.f);
        fc2_w.assign(static_cast<std::size_t>(d_) * kFc1, 0.f);
        fc2_b.assign(d_, 0.f);
    }

    int input_size() const { return input_size_; }
    int in_channels() const { return in_channels_; }
    int descriptor_dim() const { return d_; }

    // Mutable views over every parameter tensor, in a fixed order.
    std::vector<std::vector<float>*> param_tensors() {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b,
                &fc1_w,   &fc1_b,   &fc2_w,   &fc2_b};
    }
    std::vector<const std::vector<float>*> param_tensors() const {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b,
                &fc1_w,   &fc1_b,   &fc2_w,   &fc2_b};
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto* t : param_tensors()) n += t->size();
        return n;
    }

    // Fan-in-scaled uniform init, biases zero, deterministic per seed.
    void init_params(std::uint64_t seed) {
        Rng rng(mix_seed(seed, 0x696e6974ULL));
        auto fill = [&](std::vector<float>& w, int fan_in) {
            double bound = std::sqrt(6.0 / fan_in);
            for (auto& v : w) {
                v = static_cast<float>(rng.uniform(-bound, bound));
            }
        };
        fill(conv1_w, in_channels_ * kKernel * kKernel);
        fill(conv2_w, kConv1Filters * kKernel * kKernel);
        fill(fc1_w, flat_);
        fill(fc2_w, kFc1);
        std::fill(conv1_b.begin(), conv1_b.end(), 0.f);
        std::fill(conv2_b.begin(), conv2_b.end(), 0.f);
        std::fill(fc1_b.begin(), fc1_b.end(), 0.f);
        std::fill(fc2_b.begin(), fc2_b.end(), 0.f);
    }

    struct Cache {
        std::vector<float> input;
        std::vector<float> conv1_pre, pool1_out;
        std::vector<int> pool1_arg;
        std::vector<float> conv2_pre, pool2_out;
        std::vector<int> pool2_arg;
        std::vector<float> fc1_pre, fc1_out;
    };

    struct Gradients {
        std::vector<float> conv1_w, conv1_b, conv2_w, conv2_b;
        std::vector<float> fc1_w, fc1_b, fc2_w, fc2_b;

        std::vector<std::vector<float>*> tensors() {
            return {&conv1_w, &conv1_b, &conv2_w, &conv2_b,
                    &fc1_w,   &fc1_b,   &fc2_w,   &fc2_b};
        }

        void accumulate(const Gradients& o) {
            auto mine = tensors();
            auto theirs = const_cast<Gradients&>(o).tensors();
            for (std::size_t t = 0; t < mine.size(); ++t) {
                for (std::size_t i = 0; i < mine[t]->size(); ++i) {
                    (*mine[t])[i] += (*theirs[t])[i];
                }
            }
        }
    };

    Gradients zero_gradients() const {
        Gradients g;
        g.conv1_w.assign(conv1_w.size(), 0.f);
        g.conv1_b.assign(conv1_b.size(), 0.f);
        g.conv2_w.assign(conv2_w.size(), 0.f);
        g.conv2_b.assign(conv2_b.size(), 0.f);
        g.fc1_w.assign(fc1_w.size(), 0.f);
        g.fc1_b.assign(fc1_b.size(), 0.f);
        g.fc2_w.assign(fc2_w.size(), 0.f);
        g.fc2_b.assign(fc2_b.size(), 0.f);
        return g;
    }

    Descriptor forward(const PatchTensor& patch, Cache* cache = nullptr) const {
        if (patch.size != input_size_ || patch.channels() != in_channels_) {
            throw config_error("patch shape does not match network input spec");
        }
        return forward_raw(patch.data, cache);
    }

    Descriptor forward_raw(const std::vector<float>& input,
                           Cache* cache = nullptr) const {
        if (input.size() != static_cast<std::size_t>(in_channels_) *
                                input_size_ * input_size_) {
            throw config_error("input buffer size mismatch");
        }
        Cache local;
        Cache& c = cache ? *cache : local;
        c.input = input;

        conv_forward(input, in_channels_, input_size_, conv1_w, conv1_b,
                     kConv1Filters, c.conv1_pre);
        pool_forward(c.conv1_pre, kConv1Filters, s1_, c.pool1_out, c.pool1_arg);
        conv_forward(c.pool1_out, kConv1Filters, p1_, conv2_w, conv2_b,
                     kConv2Filters, c.conv2_pre);
        pool_forward(c.conv2_pre, kConv2Filters, s2_, c.pool2_out, c.pool2_arg);

        c.fc1_pre.assign(kFc1, 0.f);
        for (int o = 0; o < kFc1; ++o) {
            double acc = fc1_b[o];
            const float* w = fc1_w.data() + static_cast<std::size_t>(o) * flat_;
            for (int i = 0; i < flat_; ++i) acc += w[i] * c.pool2_out[i];
            c.fc1_pre[o] = static_cast<float>(acc);
        }
        c.fc1_out.resize(kFc1);
        for (int o = 0; o < kFc1; ++o) {
            c.fc1_out[o] = c.fc1_pre[o] > 0 ? c.fc1_pre[o] : 0.f;
        }

        Descriptor out(d_);
        for (int o = 0; o < d_; ++o) {
            double acc = fc2_b[o];
            const float* w = fc2_w.data() + static_cast<std::size_t>(o) * kFc1;
            for (int i = 0; i < kFc1; ++i) acc += w[i] * c.fc1_out[i];
            out[o] = static_cast<float>(acc);
        }
        return out;
    }

    // Backprop from dL/d descriptor. Returns the input gradient via
    // input_grad when non-null.
    Gradients backward(const Descriptor& upstream, const Cache& cache,
                       std::vector<float>* input_grad = nullptr) const {
        if (static_cast<int>(upstream.size()) != d_) {
            throw config_error("upstream gradient dimension mismatch");
        }
        if (cache.input.size() != static_cast<std::size_t>(in_channels_) *
                                      input_size_ * input_size_ ||
            cache.fc1_out.size() != static_cast<std::size_t>(kFc1)) {
            throw invariant_error("backward: cache does not match this network");
        }
        Gradients g = zero_gradients();

        // fc2
        std::vector<float> d_fc1_out(kFc1, 0.f);
        for (int o = 0; o < d_; ++o) {
            float up = upstream[o];
            float* gw = g.fc2_w.data() + static_cast<std::size_t>(o) * kFc1;
            const float* w = fc2_w.data() + static_cast<std::size_t>(o) * kFc1;
            g.fc2_b[o] += up;
            for (int i = 0; i < kFc1; ++i) {
                gw[i] += up * cache.fc1_out[i];
                d_fc1_out[i] += up * w[i];
            }
        }
        // fc1 relu
        std::vector<float> d_fc1_pre(kFc1);
        for (int i = 0; i < kFc1; ++i) {
            d_fc1_pre[i] = cache.fc1_pre[i] > 0 ? d_fc1_out[i] : 0.f;
        }
        // fc1
        std::vector<float> d_pool2(flat_, 0.f);
        for (int o = 0; o < kFc1; ++o) {
            float up = d_fc1_pre[o];
            if (up == 0.f) continue;
            float* gw = g.fc1_w.data() + static_cast<std::size_t>(o) * flat_;
            const float* w = fc1_w.data() + static_cast<std::size_t>(o) * flat_;
            g.fc1_b[o] += up;
            for (int i = 0; i < flat_; ++i) {
                gw[i] += up * cache.pool2_out[i];
                d_pool2[i] += up * w[i];
            }
        }
        // pool2 + relu(conv2_pre)
        std::vector<float> d_conv2_pre(cache.conv2_pre.size(), 0.f);
        pool_backward(d_pool2, cache.pool2_arg, d_conv2_pre);
        for (std::size_t i = 0; i < d_conv2_pre.size(); ++i) {
            if (cache.conv2_pre[i] <= 0) d_conv2_pre[i] = 0.f;
        }
        // conv2
        std::vector<float> d_pool1(cache.pool1_out.size(), 0.f);
        conv_backward(cache.pool1_out, kConv1Filters, p1_, conv2_w,
                      kConv2Filters, d_conv2_pre, g.conv2_w, g.conv2_b,
                      &d_pool1);
        // pool1 + relu(conv1_pre)
        std::vector<float> d_conv1_pre(cache.conv1_pre.size(), 0.f);
        pool_backward(d_pool1, cache.pool1_arg, d_conv1_pre);
        for (std::size_t i = 0; i < d_conv1_pre.size(); ++i) {
            if (cache.conv1_pre[i] <= 0) d_conv1_pre[i] = 0.f;
        }
        // conv1
        conv_backward(cache.input, in_channels_, input_size_, conv1_w,
                      kConv1Filters, d_conv1_pre, g.conv1_w, g.conv1_b,
                      input_grad);
        return g;
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw format_error("cannot open for writing: " + path);
        bin::put_magic(os, "PMNET1");
        bin::put_u32(os, static_cast<std::uint32_t>(input_size_));
        bin::put_u32(os, static_cast<std::uint32_t>(in_channels_));
        bin::put_u32(os, static_cast<std::uint32_t>(d_));
        bin::put_u32(os, static_cast<std::uint32_t>(modality_hint));
        for (const auto* t : param_tensors()) {
            bin::put_u64(os, t->size());
            bin::put_f32_block(os, *t);
        }
    }

    static EmbeddingNet load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw format_error("cannot open: " + path);
        bin::expect_magic(is, "PMNET1");
        int size = static_cast<int>(bin::get_u32(is));
        int channels = static_cast<int>(bin::get_u32(is));
        int d = static_cast<int>(bin::get_u32(is));
        std::uint32_t modality = bin::get_u32(is);
        if (modality > static_cast<std::uint32_t>(Modality::rgbdn)) {
            throw format_error("checkpoint has unknown modality");
        }
        EmbeddingNet net(size, channels, d);
        net.modality_hint = static_cast<Modality>(modality);
        if (channel_count(modality_mask(net.modality_hint)) != channels) {
            throw format_error("checkpoint modality/channel mismatch");
        }
        for (auto* t : net.param_tensors()) {
            std::uint64_t n = bin::get_u64(is);
            if (n != t->size()) throw format_error("checkpoint tensor size mismatch");
            bin::get_f32_block(is, *t);
        }
        if (!is) throw format_error("truncated checkpoint");
        return net;
    }

    std::vector<float> conv1_w, conv1_b, conv2_w, conv2_b;
    std::vector<float> fc1_w, fc1_b, fc2_w, fc2_b;
    // Which channel planes this net was trained on; travels with the
    // checkpoint so evaluation assembles the right inputs (several
    // modalities share a channel count).
    Modality modality_hint = Modality::rgbd;

  private:
    // valid convolution with relu applied by the caller; out = pre-activation
    static void conv_forward(const std::vector<float>& in, int in_ch,
                             int in_size, const std::vector<float>& w,
                             const std::vector<float>& b, int out_ch,
                             std::vector<float>& out) {
        int out_size = in_size - kKernel + 1;
        out.assign(static_cast<std::size_t>(out_ch) * out_size * out_size, 0.f);
        for (int f = 0; f < out_ch; ++f) {
            for (int y = 0; y < out_size; ++y) {
                for (int x = 0; x < out_size; ++x) {
                    double acc = b[f];
                    for (int c = 0; c < in_ch; ++c) {
                        const float* wp =
                            w.data() +
                            ((static_cast<std::size_t>(f) * in_ch + c) * kKernel) *
                                kKernel;
                        const float* ip =
                            in.data() + (static_cast<std::size_t>(c) * in_size +
                                         y) * in_size + x;
                        for (int ky = 0; ky < kKernel; ++ky) {
                            for (int kx = 0; kx < kKernel; ++kx) {
                                acc += wp[ky * kKernel + kx] *
                                       ip[ky * in_size + kx];
                            }
                        }
                    }
                    out[(static_cast<std::size_t>(f) * out_size + y) * out_size +
                        x] = static_cast<float>(acc);
                }
            }
        }
    }

    // relu is fused before pooling: pool input is max(0, pre-activation)
    static void pool_forward(const std::vector<float>& pre, int channels,
                             int in_size, std::vector<float>& out,
                             std::vector<int>& argmax) {
        int out_size = in_size / 2;
        out.assign(static_cast<std::size_t>(channels) * out_size * out_size, 0.f);
        argmax.assign(out.size(), 0);
        for (int c = 0; c < channels; ++c) {
            for (int y = 0; y < out_size; ++y) {
                for (int x = 0; x < out_size; ++x) {
                    int best = -1;
                    float bv = 0;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            int idx = (c * in_size + 2 * y + dy) * in_size +
                                      2 * x + dx;
                            float v = pre[idx] > 0 ? pre[idx] : 0.f;
                            if (best < 0 || v > bv) {
                                best = idx;
                                bv = v;
                            }
                        }
                    }
                    std::size_t o =
                        (static_cast<std::size_t>(c) * out_size + y) * out_size + x;
                    out[o] = bv;
                    argmax[o] = best;
                }
            }
        }
    }

    static void pool_backward(const std::vector<float>& d_out,
                              const std::vector<int>& argmax,
                              std::vector<float>& d_pre) {
        for (std::size_t i = 0; i < d_out.size(); ++i) {
            d_pre[argmax[i]] += d_out[i];
        }
    }

    static void conv_backward(const std::vector<float>& in, int in_ch,
                              int in_size, const std::vector<float>& w,
                              int out_ch, const std::vector<float>& d_out,
                              std::vector<float>& g_w, std::vector<float>& g_b,
                              std::vector<float>* d_in) {
        int out_size = in_size - kKernel + 1;
        if (d_in) d_in->assign(in.size(), 0.f);
        for (int f = 0; f < out_ch; ++f) {
            for (int y = 0; y < out_size; ++y) {
                for (int x = 0; x < out_size; ++x) {
                    float up = d_out[(static_cast<std::size_t>(f) * out_size + y) *
                                         out_size + x];
                    if (up == 0.f) continue;
                    g_b[f] += up;
                    for (int c = 0; c < in_ch; ++c) {
                        float* gwp =
                            g_w.data() +
                            ((static_cast<std::size_t>(f) * in_ch + c) * kKernel) *
                                kKernel;
                        const float* wp =
                            w.data() +
                            ((static_cast<std::size_t>(f) * in_ch + c) * kKernel) *
                                kKernel;
                        const float* ip =
                            in.data() + (static_cast<std::size_t>(c) * in_size +
                                         y) * in_size + x;
                        float* dip =
                            d_in ? d_in->data() +
                                       (static_cast<std::size_t>(c) * in_size + y) *
                                           in_size + x
                                 : nullptr;
                        for (int ky = 0; ky < kKernel; ++ky) {
                            for (int kx = 0; kx < kKernel; ++kx) {
                                gwp[ky * kKernel + kx] += up * ip[ky * in_size + kx];
                                if (dip) {
                                    dip[ky * in_size + kx] +=
                                        up * wp[ky * kKernel + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    int input_size_ = 0, in_channels_ = 0, d_ = 0;
    int s1_ = 0, p1_ = 0, s2_ = 0, p2_ = 0, flat_ = 0;
};

}  // namespace pml
