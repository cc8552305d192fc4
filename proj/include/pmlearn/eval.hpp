#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pmlearn/common.hpp"
#include "pmlearn/embed.hpp"
#include "pmlearn/geometry.hpp"
#include "pmlearn/imaging.hpp"
#include "pmlearn/knn.hpp"

namespace pml {

struct EvalResult {
    double classification_rate = 0;
    std::vector<double> thresholds_deg = {10, 20, 40};
    std::vector<double> tolerance_hist;     // fraction correct AND within t
    double mean_ang_err_correct_deg = 0;    // over correctly classified only
    std::map<int, double> per_class_rate;

    void validate() const {
        double prev = 0;
        for (std::size_t i = 0; i < tolerance_hist.size(); ++i) {
            if (tolerance_hist[i] < prev - 1e-12 || tolerance_hist[i] < 0 ||
                tolerance_hist[i] > 1) {
                throw invariant_error("tolerance histogram not monotone in threshold");
            }
            if (tolerance_hist[i] > classification_rate + 1e-12) {
                throw invariant_error("tolerance entry exceeds classification rate");
            }
            prev = tolerance_hist[i];
        }
    }
};

// Single-nearest-neighbor protocol: a sample is correct iff the closest
// entry shares its class; angular error is the pose distance to that entry.
template <typename SampleRange>
EvalResult evaluate(const EmbeddingNet& net, const DescriptorDB& db,
                    const SampleRange& test_set,
                    const std::vector<double>& thresholds_deg = {10, 20, 40}) {
    EvalResult result;
    result.thresholds_deg = thresholds_deg;
    result.tolerance_hist.assign(thresholds_deg.size(), 0.0);

    std::size_t total = 0;
    std::size_t correct = 0;
    double err_sum_deg = 0;
    std::map<int, std::pair<int, int>> per_class;  // class -> (correct, total)

    for (const Sample& s : test_set) {
        Descriptor d = net.forward(s.patch);
        auto hits = db.query(d, 1);
        const DbEntry& nn = db.entry(hits[0].index);
        ++total;
        auto& pc = per_class[s.class_id];
        ++pc.second;
        if (nn.class_id != s.class_id) continue;
        ++correct;
        ++pc.first;
        double err_deg = quat_angle(s.pose, nn.pose) * 180.0 / M_PI;
        err_sum_deg += err_deg;
        for (std::size_t t = 0; t < thresholds_deg.size(); ++t) {
            if (err_deg <= thresholds_deg[t]) result.tolerance_hist[t] += 1.0;
        }
    }
    if (total == 0) throw config_error("evaluate: empty test set");

    result.classification_rate = static_cast<double>(correct) / total;
    for (auto& h : result.tolerance_hist) h /= static_cast<double>(total);
    result.mean_ang_err_correct_deg = correct ? err_sum_deg / correct : 0.0;
    for (const auto& [cls, counts] : per_class) {
        result.per_class_rate[cls] =
            static_cast<double>(counts.first) / counts.second;
    }
    result.validate();
    return result;
}

inline std::string eval_table_row(const std::string& name, const EvalResult& r) {
    std::ostringstream os;
    os << std::left << std::setw(16) << name << std::right << std::fixed
       << std::setprecision(1);
    for (double h : r.tolerance_hist) os << std::setw(9) << h * 100 << "%";
    os << std::setw(9) << r.classification_rate * 100 << "%";
    os << std::setw(12) << std::setprecision(2) << r.mean_ang_err_correct_deg;
    return os.str();
}

inline std::string eval_table(const std::vector<std::pair<std::string, EvalResult>>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "run";
    if (!rows.empty()) {
        for (double t : rows.front().second.thresholds_deg) {
            os << std::right << std::setw(9) << t << "deg";
        }
    }
    os << std::right << std::setw(10) << "class" << std::setw(12) << "mean_err";
    os << "\n";
    for (const auto& [name, r] : rows) os << eval_table_row(name, r) << "\n";
    return os.str();
}

inline void write_eval_csv(const std::string& path,
                           const std::vector<std::pair<std::string, EvalResult>>& rows) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open for writing: " + path);
    os << "run,class_rate,tol10,tol20,tol40,mean_err_deg\n";
    os << std::setprecision(17);
    for (const auto& [name, r] : rows) {
        os << name << "," << r.classification_rate;
        for (double h : r.tolerance_hist) os << "," << h;
        os << "," << r.mean_ang_err_correct_deg << "\n";
    }
}

inline std::vector<std::pair<std::string, EvalResult>> read_eval_csv(
    const std::string& path) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw format_error("empty eval csv");
    std::vector<std::pair<std::string, EvalResult>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::getline(ls, field, ',');
        EvalResult r;
        auto next = [&]() {
            std::string f;
            if (!std::getline(ls, f, ',')) throw format_error("short eval csv row");
            return std::stod(f);
        };
        std::string name = field;
        r.classification_rate = next();
        r.tolerance_hist = {next(), next(), next()};
        r.mean_ang_err_correct_deg = next();
        rows.emplace_back(name, r);
    }
    return rows;
}

// Per-epoch curves for several runs, one row per (run, epoch).
struct EpochPoint {
    int epoch = 0;
    double loss = 0;
    double class_rate = 0;
    double tol10 = 0, tol20 = 0, tol40 = 0;
    double mean_err_deg = 0;
};

inline void write_curves_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<EpochPoint>>>& runs) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open for writing: " + path);
    os << "epoch,run,loss,class_rate,tol10,tol20,tol40,mean_err_deg\n";
    os << std::setprecision(17);
    for (const auto& [name, points] : runs) {
        for (const auto& p : points) {
            os << p.epoch << "," << name << "," << p.loss << "," << p.class_rate
               << "," << p.tol10 << "," << p.tol20 << "," << p.tol40 << ","
               << p.mean_err_deg << "\n";
        }
    }
}

}  // namespace pml
