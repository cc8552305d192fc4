#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/dataset.hpp"
#include "pmlearn/embed.hpp"
#include "pmlearn/eval.hpp"
#include "pmlearn/imaging.hpp"
#include "pmlearn/knn.hpp"
#include "pmlearn/loss.hpp"
#include "pmlearn/noise.hpp"
#include "pmlearn/rng.hpp"

namespace pml {

struct TrainConfig {
    int epochs = 15;
    int batch_size = 32;  // anchors per batch; 2 triplets + 1 pair per anchor
    double learning_rate = 0.01;
    double momentum = 0.9;
    double max_grad_norm = 5;  // global gradient-norm clip; 0 disables
    MarginMode margin_mode = MarginMode::dynamic_margin;
    double static_margin = 0.01;
    double margin_n = 2 * M_PI;
    Modality modality = Modality::rgbd;
    NoiseSpec background;  // online background fill for synthetic anchors
    NormalParams normal_params;
    double probe_fraction = 0.1;  // share of the test set evaluated per epoch
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 0) throw config_error("train: negative epoch count");
        if (batch_size <= 0) throw config_error("train: batch size must be > 0");
        if (learning_rate < 0) throw config_error("train: negative learning rate");
        if (momentum < 0 || momentum >= 1) {
            throw config_error("train: momentum must be in [0, 1)");
        }
        if (max_grad_norm < 0) {
            throw config_error("train: negative gradient clip");
        }
        if (probe_fraction <= 0 || probe_fraction > 1) {
            throw config_error("train: probe fraction must be in (0, 1]");
        }
        if (margin_mode == MarginMode::static_margin && static_margin <= 0) {
            throw config_error("train: static margin must be > 0");
        }
        if (margin_mode == MarginMode::dynamic_margin && margin_n <= M_PI) {
            throw config_error("train: dynamic margin constant must be > pi");
        }
        background.validate();
    }
};

struct EpochStats {
    int epoch = 0;
    double loss = 0;
    double class_rate = 0;
    double tol10 = 0, tol20 = 0, tol40 = 0;
    double mean_ang_err_deg = 0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
};

inline void write_report_csv(const std::string& path, const TrainReport& r) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open for writing: " + path);
    os << "epoch,loss,class_rate,mean_ang_err\n";
    os << std::setprecision(17);
    for (const auto& e : r.epochs) {
        os << e.epoch << "," << e.loss << "," << e.class_rate << ","
           << e.mean_ang_err_deg << "\n";
    }
}

inline std::vector<EpochPoint> to_curve(const TrainReport& r) {
    std::vector<EpochPoint> out;
    for (const auto& e : r.epochs) {
        out.push_back({e.epoch, e.loss, e.class_rate, e.tol10, e.tol20, e.tol40,
                       e.mean_ang_err_deg});
    }
    return out;
}

inline bool modality_needs_normals(Modality m) {
    return (modality_mask(m) & mask_n) != 0;
}

// Reduce a stored sample to the network's input channels, computing normals
// first if they are required but absent.
inline PatchTensor to_input(const Sample& s, Modality modality,
                            const NormalParams& np = {}) {
    if (modality_needs_normals(modality) && !s.patch.has(ch_nx)) {
        PatchTensor full = s.patch;
        add_normals(full, np);
        return assemble_modality(full, modality);
    }
    return assemble_modality(s.patch, modality);
}

// Synthetic anchors get a fresh background every visit; real anchors are
// used as captured.
inline PatchTensor train_input(const Sample& s, const TrainConfig& cfg,
                               std::uint64_t visit_seed) {
    if (s.origin != Origin::synthetic) {
        return to_input(s, cfg.modality, cfg.normal_params);
    }
    PatchTensor full = s.patch;
    NoiseSpec spec = cfg.background;
    spec.seed = visit_seed;
    fill_background(full, foreground_mask(full), spec, cfg.normal_params);
    Sample tmp;
    tmp.patch = std::move(full);
    return to_input(tmp, cfg.modality, cfg.normal_params);
}

inline std::vector<Sample> assemble_set(const SampleSet& set, Modality modality,
                                        const NormalParams& np = {}) {
    std::vector<Sample> out;
    out.reserve(set.samples.size());
    for (const auto& s : set.samples) {
        Sample a = s;
        a.patch = to_input(s, modality, np);
        out.push_back(std::move(a));
    }
    return out;
}

struct Batch {
    std::vector<PatchTensor> inputs;  // anchors first, then batch templates
    std::vector<int> anchor_sample;   // into the training set
    std::vector<int> template_index;  // into the template set, unique
    std::vector<TripletIdx> triplets;
    std::vector<PairIdx> pairs;
};

namespace detail {

// Nearest same-class template per training sample (the puller).
inline std::vector<int> nearest_templates(const SampleSet& train_set,
                                          const SampleSet& templates) {
    std::vector<int> out(train_set.samples.size(), -1);
    for (std::size_t i = 0; i < train_set.samples.size(); ++i) {
        const auto& s = train_set.samples[i];
        double best = 1e9;
        for (std::size_t t = 0; t < templates.samples.size(); ++t) {
            if (templates.samples[t].class_id != s.class_id) continue;
            double a = quat_angle(s.pose, templates.samples[t].pose);
            if (a < best) {
                best = a;
                out[i] = static_cast<int>(t);
            }
        }
        if (out[i] < 0) {
            throw invariant_error("training sample has no same-class template");
        }
    }
    return out;
}

}  // namespace detail

// Each anchor contributes two triplets (one pushing away a same-class
// template in a different pose, one pushing away a different class when
// available) and one pair tying it to its puller.
inline Batch make_batch(const SampleSet& train_set, const SampleSet& templates,
                        const std::vector<Sample>& template_inputs,
                        const std::vector<int>& pullers,
                        const std::vector<int>& anchor_indices,
                        const TrainConfig& cfg, int epoch, Rng& rng) {
    Batch batch;
    std::vector<int> tmpl_slot(templates.samples.size(), -1);
    auto slot_of = [&](int tmpl) {
        if (tmpl_slot[tmpl] < 0) {
            tmpl_slot[tmpl] = static_cast<int>(anchor_indices.size() +
                                               batch.template_index.size());
            batch.template_index.push_back(tmpl);
        }
        return tmpl_slot[tmpl];
    };

    bool multi_class = false;
    for (const auto& s : templates.samples) {
        if (s.class_id != templates.samples.front().class_id) {
            multi_class = true;
            break;
        }
    }

    for (std::size_t a = 0; a < anchor_indices.size(); ++a) {
        int sample_idx = anchor_indices[a];
        const Sample& anchor = train_set.samples[sample_idx];
        int anchor_slot = static_cast<int>(a);
        batch.anchor_sample.push_back(sample_idx);

        int puller = pullers[sample_idx];
        int puller_slot = slot_of(puller);
        double puller_angle = quat_angle(anchor.pose,
                                         templates.samples[puller].pose);

        auto margin_for = [&](int pusher) {
            if (cfg.margin_mode == MarginMode::static_margin) {
                return cfg.static_margin;
            }
            return dynamic_margin(anchor.class_id, anchor.pose,
                                  templates.samples[pusher].class_id,
                                  templates.samples[pusher].pose, cfg.margin_n);
        };

        // Same-class pusher: must be strictly farther in pose than the
        // puller so the dynamic margin stays positive and meaningful.
        int same_pusher = -1;
        for (int attempt = 0; attempt < 32 && same_pusher < 0; ++attempt) {
            int cand = static_cast<int>(rng.index(templates.samples.size()));
            if (templates.samples[cand].class_id != anchor.class_id) continue;
            if (quat_angle(anchor.pose, templates.samples[cand].pose) <=
                puller_angle + 1e-6) {
                continue;
            }
            same_pusher = cand;
        }
        if (same_pusher >= 0) {
            batch.triplets.push_back({anchor_slot, puller_slot,
                                      slot_of(same_pusher),
                                      margin_for(same_pusher)});
        }

        if (multi_class) {
            int other = -1;
            while (other < 0) {
                int cand = static_cast<int>(rng.index(templates.samples.size()));
                if (templates.samples[cand].class_id != anchor.class_id) {
                    other = cand;
                }
            }
            batch.triplets.push_back(
                {anchor_slot, puller_slot, slot_of(other), margin_for(other)});
        }

        batch.pairs.push_back({anchor_slot, puller_slot});
    }

    batch.inputs.reserve(anchor_indices.size() + batch.template_index.size());
    for (std::size_t a = 0; a < anchor_indices.size(); ++a) {
        std::uint64_t visit = mix_seed(
            mix_seed(cfg.seed, 0x76697369ULL + static_cast<std::uint64_t>(epoch)),
            static_cast<std::uint64_t>(anchor_indices[a]));
        batch.inputs.push_back(
            train_input(train_set.samples[anchor_indices[a]], cfg, visit));
    }
    for (int t : batch.template_index) {
        batch.inputs.push_back(template_inputs[t].patch);
    }
    return batch;
}

struct SgdState {
    std::vector<std::vector<float>> velocity;
};

inline void sgd_step(EmbeddingNet& net, const EmbeddingNet::Gradients& grads,
                     SgdState& state, double lr, double momentum) {
    auto params = net.param_tensors();
    auto gs = const_cast<EmbeddingNet::Gradients&>(grads).tensors();
    if (state.velocity.empty()) {
        for (auto* p : params) state.velocity.emplace_back(p->size(), 0.f);
    }
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (state.velocity[t].size() != params[t]->size()) {
            throw invariant_error("sgd: velocity does not match parameters");
        }
        auto& v = state.velocity[t];
        auto& w = *params[t];
        const auto& g = *gs[t];
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = static_cast<float>(momentum * v[i] - lr * g[i]);
            w[i] += v[i];
        }
    }
}

template <typename LogFn>
TrainReport train(EmbeddingNet& net, const SampleSet& train_set,
                  const SampleSet& templates, const SampleSet& test_set,
                  const TrainConfig& cfg, LogFn&& log) {
    cfg.validate();
    if (train_set.samples.empty()) throw config_error("train: empty training set");
    if (templates.samples.empty()) throw config_error("train: empty template set");

    auto template_inputs =
        assemble_set(templates, cfg.modality, cfg.normal_params);
    auto pullers = detail::nearest_templates(train_set, templates);

    // Fixed probe subset of the test set, evaluated after each epoch.
    std::vector<Sample> probe;
    if (!test_set.samples.empty()) {
        auto assembled = assemble_set(test_set, cfg.modality, cfg.normal_params);
        int stride = std::max(
            1, static_cast<int>(std::llround(1.0 / cfg.probe_fraction)));
        for (std::size_t i = 0; i < assembled.size(); i += stride) {
            probe.push_back(std::move(assembled[i]));
        }
    }

    TrainReport report;
    SgdState sgd;
    std::vector<int> order(train_set.samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, 0x65706f6368ULL +
                                       static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        double loss_sum = 0;
        std::size_t term_count = 0;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(
                                                   cfg.batch_size));
            std::vector<int> anchors(order.begin() + start, order.begin() + end);
            Batch batch = make_batch(train_set, templates, template_inputs,
                                     pullers, anchors, cfg, epoch, rng);
            if (batch.triplets.empty() && batch.pairs.empty()) continue;

            std::vector<EmbeddingNet::Cache> caches(batch.inputs.size());
            std::vector<Descriptor> descriptors(batch.inputs.size());
            for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
                descriptors[i] = net.forward(batch.inputs[i], &caches[i]);
            }

            LossResult lr = total_loss(descriptors, batch.triplets, batch.pairs);
            if (!std::isfinite(lr.loss)) {
                throw training_error("loss diverged to a non-finite value");
            }
            std::size_t terms = batch.triplets.size() + batch.pairs.size();
            loss_sum += lr.loss;
            term_count += terms;

            double scale = 1.0 / static_cast<double>(terms);
            EmbeddingNet::Gradients total = net.zero_gradients();
            for (std::size_t i = 0; i < descriptors.size(); ++i) {
                bool zero = true;
                for (float g : lr.grads[i]) {
                    if (g != 0.f) {
                        zero = false;
                        break;
                    }
                }
                if (zero) continue;
                Descriptor up = lr.grads[i];
                for (float& g : up) g = static_cast<float>(g * scale);
                total.accumulate(net.backward(up, caches[i]));
            }
            if (cfg.max_grad_norm > 0) {
                double sq = 0;
                for (auto* g : total.tensors()) {
                    for (float x : *g) sq += static_cast<double>(x) * x;
                }
                if (sq > cfg.max_grad_norm * cfg.max_grad_norm) {
                    float s = static_cast<float>(cfg.max_grad_norm /
                                                 std::sqrt(sq));
                    for (auto* g : total.tensors()) {
                        for (float& x : *g) x *= s;
                    }
                }
            }
            sgd_step(net, total, sgd, cfg.learning_rate, cfg.momentum);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = term_count ? loss_sum / static_cast<double>(term_count) : 0;
        if (!probe.empty()) {
            auto db = build_db(net, template_inputs);
            EvalResult r = evaluate(net, db, probe);
            stats.class_rate = r.classification_rate;
            stats.tol10 = r.tolerance_hist.size() > 0 ? r.tolerance_hist[0] : 0;
            stats.tol20 = r.tolerance_hist.size() > 1 ? r.tolerance_hist[1] : 0;
            stats.tol40 = r.tolerance_hist.size() > 2 ? r.tolerance_hist[2] : 0;
            stats.mean_ang_err_deg = r.mean_ang_err_correct_deg;
        }
        report.epochs.push_back(stats);
        log(stats);
    }
    return report;
}

inline TrainReport train(EmbeddingNet& net, const SampleSet& train_set,
                         const SampleSet& templates, const SampleSet& test_set,
                         const TrainConfig& cfg) {
    return train(net, train_set, templates, test_set, cfg,
                 [](const EpochStats&) {});
}

}  // namespace pml
