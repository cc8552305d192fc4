#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/embed.hpp"
#include "pmlearn/geometry.hpp"

namespace pml {

struct DbEntry {
    Descriptor descriptor;
    int class_id = -1;
    Quaternion pose;
};

struct QueryHit {
    int index = -1;
    double distance = 0;  // Euclidean
};

// Template descriptor database. Brute force is the reference search path;
// a kd-tree speeds up low-dimensional descriptors and must agree exactly.
class DescriptorDB {
  public:
    DescriptorDB() = default;

    explicit DescriptorDB(std::vector<DbEntry> entries)
        : entries_(std::move(entries)) {
        if (entries_.empty()) {
            throw config_error("DescriptorDB: empty entry set");
        }
        dim_ = static_cast<int>(entries_[0].descriptor.size());
        for (const auto& e : entries_) {
            if (static_cast<int>(e.descriptor.size()) != dim_) {
                throw config_error("DescriptorDB: inconsistent dimensions");
            }
            for (float v : e.descriptor) {
                if (!std::isfinite(v)) {
                    throw invariant_error("DescriptorDB: non-finite descriptor");
                }
            }
        }
        if (dim_ <= 16) build_tree();
    }

    int dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    const DbEntry& entry(int i) const { return entries_[i]; }
    const std::vector<DbEntry>& entries() const { return entries_; }
    bool has_tree() const { return !nodes_.empty(); }

    std::vector<QueryHit> query(const Descriptor& q, int k) const {
        if (k < 1 || static_cast<std::size_t>(k) > entries_.size()) {
            throw bounds_error("query: k out of range");
        }
        if (static_cast<int>(q.size()) != dim_) {
            throw config_error("query: dimension mismatch");
        }
        return has_tree() ? query_tree(q, k) : query_brute(q, k);
    }

    // Always available, used as the verification oracle for the tree.
    std::vector<QueryHit> query_brute(const Descriptor& q, int k) const {
        std::vector<QueryHit> hits(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            hits[i] = {static_cast<int>(i),
                       std::sqrt(sqdist(q, entries_[i].descriptor))};
        }
        std::sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
            return a.distance != b.distance ? a.distance < b.distance
                                            : a.index < b.index;
        });
        hits.resize(k);
        return hits;
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw format_error("cannot open for writing: " + path);
        bin::put_magic(os, "PMDB1");
        bin::put_u32(os, static_cast<std::uint32_t>(dim_));
        bin::put_u64(os, entries_.size());
        for (const auto& e : entries_) {
            bin::put_u32(os, static_cast<std::uint32_t>(e.class_id));
            bin::put_f64(os, e.pose.w);
            bin::put_f64(os, e.pose.x);
            bin::put_f64(os, e.pose.y);
            bin::put_f64(os, e.pose.z);
            bin::put_f32_block(os, e.descriptor);
        }
    }

    static DescriptorDB load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw format_error("cannot open: " + path);
        bin::expect_magic(is, "PMDB1");
        int dim = static_cast<int>(bin::get_u32(is));
        std::uint64_t n = bin::get_u64(is);
        std::vector<DbEntry> entries(n);
        for (auto& e : entries) {
            e.class_id = static_cast<int>(bin::get_u32(is));
            e.pose.w = bin::get_f64(is);
            e.pose.x = bin::get_f64(is);
            e.pose.y = bin::get_f64(is);
            e.pose.z = bin::get_f64(is);
            e.descriptor.resize(dim);
            bin::get_f32_block(is, e.descriptor);
        }
        if (!is) throw format_error("truncated descriptor db");
        return DescriptorDB(std::move(entries));
    }

  private:
    static double sqdist(const Descriptor& a, const Descriptor& b) {
        double acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double d = static_cast<double>(a[i]) - b[i];
            acc += d * d;
        }
        return acc;
    }

    struct Node {
        int axis = -1;        // -1 marks a leaf
        float split = 0;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
    };

    void build_tree() {
        order_.resize(entries_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
        nodes_.reserve(2 * entries_.size() / kLeafSize + 2);
        build_node(0, static_cast<int>(order_.size()));
    }

    static constexpr int kLeafSize = 16;

    int build_node(int begin, int end) {
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        if (end - begin <= kLeafSize) {
            nodes_[id].begin = begin;
            nodes_[id].end = end;
            return id;
        }
        // split on the axis with the largest spread
        int axis = 0;
        double best_spread = -1;
        for (int a = 0; a < dim_; ++a) {
            double lo = 1e300, hi = -1e300;
            for (int i = begin; i < end; ++i) {
                double v = entries_[order_[i]].descriptor[a];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                axis = a;
            }
        }
        int mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid,
                         order_.begin() + end, [&](int a, int b) {
                             float va = entries_[a].descriptor[axis];
                             float vb = entries_[b].descriptor[axis];
                             return va != vb ? va < vb : a < b;
                         });
        float split = entries_[order_[mid]].descriptor[axis];
        int left = build_node(begin, mid);
        int right = build_node(mid, end);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    // Bounded best-first leaf scan. Candidates are kept ordered by
    // (distance, index) so tie-breaking matches brute force exactly.
    struct Best {
        int k;
        std::vector<QueryHit> hits;  // sorted ascending

        void offer(int index, double dist) {
            if (static_cast<int>(hits.size()) == k) {
                if (dist > hits.back().distance ||
                    (dist == hits.back().distance && index > hits.back().index)) {
                    return;
                }
                hits.pop_back();
            }
            QueryHit h{index, dist};
            auto it = std::lower_bound(
                hits.begin(), hits.end(), h, [](const QueryHit& a, const QueryHit& b) {
                    return a.distance != b.distance ? a.distance < b.distance
                                                    : a.index < b.index;
                });
            hits.insert(it, h);
        }
    };

    void search_node(int id, const Descriptor& q, Best& best) const {
        const Node& n = nodes_[id];
        if (n.axis < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                int e = order_[i];
                best.offer(e, std::sqrt(sqdist(q, entries_[e].descriptor)));
            }
            return;
        }
        double delta = static_cast<double>(q[n.axis]) - n.split;
        int near = delta < 0 ? n.left : n.right;
        int far = delta < 0 ? n.right : n.left;
        search_node(near, q, best);
        if (static_cast<int>(best.hits.size()) < best.k ||
            std::abs(delta) <= best.hits.back().distance) {
            search_node(far, q, best);
        }
    }

    std::vector<QueryHit> query_tree(const Descriptor& q, int k) const {
        Best best{k, {}};
        best.hits.reserve(k + 1);
        search_node(0, q, best);
        return best.hits;
    }

    std::vector<DbEntry> entries_;
    int dim_ = 0;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

// Embed every template, preserving class and pose metadata.
template <typename SampleRange>
DescriptorDB build_db(const EmbeddingNet& net, const SampleRange& templates) {
    std::vector<DbEntry> entries;
    for (const Sample& s : templates) {
        DbEntry e;
        e.descriptor = net.forward(s.patch);
        e.class_id = s.class_id;
        e.pose = s.pose;
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw config_error("build_db: empty template set");
    return DescriptorDB(std::move(entries));
}

}  // namespace pml
