#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/embed.hpp"
#include "pmlearn/geometry.hpp"
#include "pmlearn/imaging.hpp"

namespace pml {

enum class MarginMode { static_margin, dynamic_margin };

inline const char* to_string(MarginMode m) {
    return m == MarginMode::static_margin ? "static" : "dynamic";
}

inline MarginMode margin_mode_from_string(const std::string& s) {
    if (s == "static") return MarginMode::static_margin;
    if (s == "dynamic") return MarginMode::dynamic_margin;
    throw config_error("unknown margin mode: " + s);
}

inline double squared_distance(const Descriptor& a, const Descriptor& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

// max(0, 1 - ||f_i - f_k||^2 / (||f_i - f_j||^2 + m))
inline double triplet_loss(const Descriptor& f_i, const Descriptor& f_j,
                           const Descriptor& f_k, double margin) {
    if (margin <= 0) throw bounds_error("triplet_loss: margin must be > 0");
    double d_neg = squared_distance(f_i, f_k);
    double d_pos = squared_distance(f_i, f_j);
    return std::max(0.0, 1.0 - d_neg / (d_pos + margin));
}

// Same class: margin is the angular pose distance. Different class: the
// constant n, which must exceed pi (the largest possible angular distance).
inline double dynamic_margin(int class_i, const Quaternion& q_i, int class_k,
                             const Quaternion& q_k, double n) {
    if (n <= M_PI) {
        throw config_error("dynamic margin constant must be > pi");
    }
    if (class_i == class_k) return quat_angle(q_i, q_k);
    return n;
}

// ||f_i - f_j||^2
inline double pair_loss(const Descriptor& f_i, const Descriptor& f_j) {
    return squared_distance(f_i, f_j);
}

// Index triples/pairs into a shared descriptor array.
struct TripletIdx {
    int anchor = 0, puller = 0, pusher = 0;
    double margin = 0;
};

struct PairIdx {
    int a = 0, b = 0;
};

struct LossResult {
    double loss = 0;
    std::vector<Descriptor> grads;  // dL/df per descriptor
};

// Sum of triplet and pair terms with analytic gradients per descriptor.
// Hinge-inactive triplets contribute zero gradient.
inline LossResult total_loss(const std::vector<Descriptor>& descriptors,
                             const std::vector<TripletIdx>& triplets,
                             const std::vector<PairIdx>& pairs) {
    if (triplets.empty() && pairs.empty()) {
        throw config_error("total_loss: empty triplet and pair sets");
    }
    LossResult out;
    out.grads.assign(descriptors.size(),
                     Descriptor(descriptors.empty() ? 0 : descriptors[0].size(),
                                0.f));

    for (const auto& t : triplets) {
        const Descriptor& fi = descriptors[t.anchor];
        const Descriptor& fj = descriptors[t.puller];
        const Descriptor& fk = descriptors[t.pusher];
        if (t.margin <= 0) throw invariant_error("triplet with non-positive margin");
        double d_neg = squared_distance(fi, fk);
        double d_pos = squared_distance(fi, fj);
        double denom = d_pos + t.margin;
        double value = 1.0 - d_neg / denom;
        if (value <= 0) continue;  // hinge inactive, subgradient 0
        out.loss += value;
        // d(1 - dn/(dp+m)) = [-ddn (dp+m) + dn ddp] / (dp+m)^2
        double inv = 1.0 / denom;
        double inv2 = inv * inv;
        for (std::size_t c = 0; c < fi.size(); ++c) {
            double dik = static_cast<double>(fi[c]) - fk[c];
            double dij = static_cast<double>(fi[c]) - fj[c];
            // ddn/dfi = 2(fi-fk); ddp/dfi = 2(fi-fj)
            out.grads[t.anchor][c] += static_cast<float>(
                -2.0 * dik * inv + d_neg * 2.0 * dij * inv2);
            out.grads[t.puller][c] +=
                static_cast<float>(-d_neg * 2.0 * dij * inv2);
            out.grads[t.pusher][c] += static_cast<float>(2.0 * dik * inv);
        }
    }

    for (const auto& p : pairs) {
        const Descriptor& fi = descriptors[p.a];
        const Descriptor& fj = descriptors[p.b];
        out.loss += pair_loss(fi, fj);
        for (std::size_t c = 0; c < fi.size(); ++c) {
            double d = static_cast<double>(fi[c]) - fj[c];
            out.grads[p.a][c] += static_cast<float>(2.0 * d);
            out.grads[p.b][c] += static_cast<float>(-2.0 * d);
        }
    }
    return out;
}

}  // namespace pml
