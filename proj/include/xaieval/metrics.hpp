#pragma once
// Thresholded noise-mask metrics. ANA is the mean mask value over retained
// pixels, SRM the mean squared value; lower ranks better for both. τ = -0.1
// retains everything; an empty retained set yields explicit null metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xaieval/explainers.hpp"
#include "xaieval/integrate.hpp"
#include "xaieval/types.hpp"
#include "xaieval/unoise.hpp"

namespace xaieval {

struct ThresholdSweep {
    std::vector<double> taus = {-0.1, 0.0, 0.1, 0.2, 0.3};
};

inline void validate_sweep(const ThresholdSweep& sweep) {
    if (sweep.taus.empty()) throw std::invalid_argument("sweep: no thresholds");
    for (std::size_t i = 0; i < sweep.taus.size(); ++i) {
        if (!std::isfinite(sweep.taus[i]))
            throw std::invalid_argument("sweep: non-finite threshold");
        if (i > 0 && sweep.taus[i] <= sweep.taus[i - 1])
            throw std::invalid_argument("sweep: thresholds must be strictly increasing");
    }
}

// {(i,j) : O_ij > tau}.
inline Region retained_pixels(const Grid& mask, double tau) {
    if (!std::isfinite(tau)) throw std::invalid_argument("retained_pixels: tau not finite");
    std::vector<std::uint8_t> m(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        m[i] = static_cast<double>(mask.v[i]) > tau ? 1 : 0;
    return region_from_mask(mask.h, mask.w, std::move(m));
}

inline std::optional<double> ana(const Grid& mask, double tau) {
    const Region r = retained_pixels(mask, tau);
    if (r.count == 0) return std::nullopt;
    double acc = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (r.mask[i]) acc += mask.v[i];
    return acc / static_cast<double>(r.count);
}

inline std::optional<double> srm(const Grid& mask, double tau) {
    const Region r = retained_pixels(mask, tau);
    if (r.count == 0) return std::nullopt;
    double acc = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (r.mask[i]) acc += static_cast<double>(mask.v[i]) * mask.v[i];
    return acc / static_cast<double>(r.count);
}

struct MetricRow {
    std::string method_id;
    std::string technique;
    double tau = 0.0;
    std::optional<double> ana;
    std::optional<double> srm;
    double retained_fraction = 0.0;
    std::int64_t image_id = 0;
};

struct MethodAggregate {
    std::string method_id;
    double tau = 0.0;
    int n = 0;           // rows with non-null metrics
    int null_count = 0;  // rows with empty retained sets
    double ana_mean = 0.0, ana_std = 0.0;
    double srm_mean = 0.0, srm_std = 0.0;
};

struct MetricsReport {
    int schema_version = 1;
    std::vector<MetricRow> rows;
    std::vector<MethodAggregate> aggregates;
    int failure_count = 0;
    std::vector<std::string> failures;
};

// Mean/std per (method, tau), in first-appearance order; nulls are skipped
// but counted.
inline void recompute_aggregates(MetricsReport& report) {
    report.aggregates.clear();
    auto find = [&report](const std::string& m, double tau) -> MethodAggregate& {
        for (auto& a : report.aggregates)
            if (a.method_id == m && a.tau == tau) return a;
        report.aggregates.push_back({m, tau, 0, 0, 0, 0, 0, 0});
        return report.aggregates.back();
    };
    // two passes: means, then stds
    for (const auto& row : report.rows) {
        auto& a = find(row.method_id, row.tau);
        if (row.ana && row.srm) {
            ++a.n;
            a.ana_mean += *row.ana;
            a.srm_mean += *row.srm;
        } else {
            ++a.null_count;
        }
    }
    for (auto& a : report.aggregates) {
        if (a.n > 0) {
            a.ana_mean /= a.n;
            a.srm_mean /= a.n;
        }
    }
    for (const auto& row : report.rows) {
        if (!row.ana || !row.srm) continue;
        auto& a = find(row.method_id, row.tau);
        a.ana_std += (*row.ana - a.ana_mean) * (*row.ana - a.ana_mean);
        a.srm_std += (*row.srm - a.srm_mean) * (*row.srm - a.srm_mean);
    }
    for (auto& a : report.aggregates) {
        a.ana_std = a.n > 0 ? std::sqrt(a.ana_std / a.n) : 0.0;
        a.srm_std = a.n > 0 ? std::sqrt(a.srm_std / a.n) : 0.0;
    }
}

// End-to-end scoring of one explainer: saliency → explanation map → noise
// mask → per-τ ANA/SRM rows. Per-image failures are recorded and skipped;
// the run continues.
inline MetricsReport evaluate_method(Explainer& explainer, const NoiseModel& noise_model,
                                     WhiteBoxSegModel& utility,
                                     const std::vector<DataItem>& images, int target_class,
                                     Technique technique, const SamplingConfig& sampling,
                                     const ThresholdSweep& sweep) {
    validate_sweep(sweep);
    MetricsReport report;
    for (const auto& item : images) {
        try {
            const SaliencyMap sal = explainer.explain(utility, item, target_class);
            SamplingConfig cfg = sampling;
            cfg.seed = derive_seed(sampling.seed, static_cast<std::uint64_t>(item.id));
            const ExplanationMap expl = integrate(technique, item.image, sal, cfg);
            const NoiseMask mask = noise_mask(noise_model, expl);
            for (double tau : sweep.taus) {
                MetricRow row;
                row.method_id = explainer.id();
                row.technique = technique_name(technique);
                row.tau = tau;
                row.ana = ana(mask.values, tau);
                row.srm = srm(mask.values, tau);
                row.retained_fraction =
                    static_cast<double>(retained_pixels(mask.values, tau).count) /
                    static_cast<double>(mask.values.size());
                row.image_id = item.id;
                report.rows.push_back(std::move(row));
            }
        } catch (const std::exception& e) {
            ++report.failure_count;
            report.failures.push_back("image " + std::to_string(item.id) + " (" +
                                      explainer.id() + "): " + e.what());
        }
    }
    recompute_aggregates(report);
    return report;
}

inline void merge_reports(MetricsReport& into, const MetricsReport& from) {
    into.rows.insert(into.rows.end(), from.rows.begin(), from.rows.end());
    into.failure_count += from.failure_count;
    into.failures.insert(into.failures.end(), from.failures.begin(), from.failures.end());
    recompute_aggregates(into);
}

namespace detail {

// Shortest decimal form that parses back to the exact same double, so CSV
// round trips (and re-rendered reports) are bit-faithful.
inline std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace detail

inline std::string metrics_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "schema_version,method_id,technique,tau,ana,srm,retained_fraction,image_id\n";
    for (const auto& r : report.rows) {
        os << report.schema_version << ',' << r.method_id << ',' << r.technique << ','
           << detail::fmt_double(r.tau) << ','
           << (r.ana ? detail::fmt_double(*r.ana) : std::string()) << ','
           << (r.srm ? detail::fmt_double(*r.srm) : std::string()) << ','
           << detail::fmt_double(r.retained_fraction) << ',' << r.image_id << '\n';
    }
    return os.str();
}

// Parses a CSV produced by metrics_csv; throws on schema mismatch.
inline MetricsReport metrics_from_csv(const std::string& csv) {
    MetricsReport report;
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) ||
        line != "schema_version,method_id,technique,tau,ana,srm,retained_fraction,image_id")
        throw std::runtime_error("metrics csv: unrecognized header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                f.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (f.size() != 8) throw std::runtime_error("metrics csv: bad row: " + line);
        if (std::stoi(f[0]) != 1) throw std::runtime_error("metrics csv: unsupported schema");
        MetricRow r;
        r.method_id = f[1];
        r.technique = f[2];
        r.tau = std::stod(f[3]);
        if (!f[4].empty()) r.ana = std::stod(f[4]);
        if (!f[5].empty()) r.srm = std::stod(f[5]);
        r.retained_fraction = std::stod(f[6]);
        r.image_id = std::stoll(f[7]);
        report.rows.push_back(std::move(r));
    }
    recompute_aggregates(report);
    return report;
}

}  // namespace xaieval
