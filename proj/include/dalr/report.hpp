#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dalr/activation_stats.hpp"
#include "dalr/compression.hpp"
#include "dalr/search.hpp"

namespace dalr::report {

/// Shortest round-trippable decimal form.
inline std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// rank,rate with 1-based rank over the ranked (descending) rates.
inline std::string profile_csv(const ActivationProfile& profile)
{
    std::ostringstream out;
    out << "rank,rate\n";
    std::size_t r = 1;
    for (std::size_t i : profile.ranked_indices)
        out << r++ << ',' << format_number(profile.rates[i]) << '\n';
    return out.str();
}

inline std::string skew_csv(const SkewReport& skew)
{
    std::ostringstream out;
    out << "rank,source_rate,target_rate\n";
    for (std::size_t i = 0; i < skew.source_curve.size(); ++i)
        out << i + 1 << ',' << format_number(skew.source_curve[i]) << ',' << format_number(skew.target_curve[i])
            << '\n';
    return out.str();
}

inline nlohmann::ordered_json profile_summary(const ActivationProfile& profile)
{
    nlohmann::ordered_json j;
    j["neurons"] = profile.size();
    if (profile.half_mass_fraction)
        j["half_mass_fraction"] = *profile.half_mass_fraction;
    else
        j["half_mass_fraction"] = "no activations";
    return j;
}

inline nlohmann::ordered_json skew_summary(const SkewReport& skew)
{
    nlohmann::ordered_json j;
    j["source_half_mass_fraction"] = skew.source_half_mass;
    j["target_half_mass_fraction"] = skew.target_half_mass;
    j["ratio"] = skew.ratio;
    return j;
}

/// Outcome of compressing one layer.
struct CompressionReport {
    std::string method;
    std::size_t layer = 0;
    std::size_t rank = 0;
    double lambda = 0.0;
    double parameter_fraction = 0.0;
    double error = 0.0;           ///< ε on the evaluation batch.
    std::string error_batch;      ///< Which batch ε was measured on.
    std::optional<double> accuracy_before;
    std::optional<double> accuracy_after;
    double seconds = 0.0;
};

inline nlohmann::ordered_json to_json(const CompressionReport& r)
{
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["layer"] = r.layer;
    j["rank"] = r.rank;
    j["lambda"] = r.lambda;
    j["parameter_fraction"] = r.parameter_fraction;
    j["reconstruction_error"] = r.error;
    j["error_batch"] = r.error_batch;
    j["accuracy_before"] = r.accuracy_before ? nlohmann::ordered_json(*r.accuracy_before) : nlohmann::ordered_json();
    j["accuracy_after"] = r.accuracy_after ? nlohmann::ordered_json(*r.accuracy_after) : nlohmann::ordered_json();
    j["seconds"] = r.seconds;
    return j;
}

/// One JSON object per line: an initial record (step 0) followed by every applied step.
inline std::string trace_jsonl(const SearchTrace& t)
{
    std::ostringstream out;
    nlohmann::ordered_json start;
    start["step"] = 0;
    start["layer"] = nullptr;
    start["rank_a"] = t.initial_rank_a;
    start["rank_b"] = t.initial_rank_b;
    start["accuracy"] = t.initial_accuracy;
    start["baseline_accuracy"] = t.baseline_accuracy;
    out << start.dump() << '\n';
    for (const auto& s : t.steps) {
        nlohmann::ordered_json j;
        j["step"] = s.step;
        j["layer"] = to_string(s.layer);
        j["rank_a"] = s.rank_a;
        j["rank_b"] = s.rank_b;
        j["accuracy"] = s.accuracy;
        j["candidate_a"] = s.candidate_a < 0 ? nlohmann::ordered_json() : nlohmann::ordered_json(s.candidate_a);
        j["candidate_b"] = s.candidate_b < 0 ? nlohmann::ordered_json() : nlohmann::ordered_json(s.candidate_b);
        out << j.dump() << '\n';
    }
    return out.str();
}

inline std::string trace_summary_csv(const SearchTrace& t)
{
    std::ostringstream out;
    out << "layer_a,layer_b,method,max_drop,baseline_accuracy,initial_accuracy,final_accuracy,steps,final_rank_a,"
           "final_rank_b,fraction_a,fraction_b,reduction_a,reduction_b,reduction_total,stop_reason\n";
    out << t.layer_a << ',' << t.layer_b << ',' << to_string(t.method) << ',' << format_number(t.max_drop) << ','
        << format_number(t.baseline_accuracy) << ',' << format_number(t.initial_accuracy) << ','
        << format_number(t.final_accuracy) << ',' << t.steps.size() << ',' << t.final_rank_a << ','
        << t.final_rank_b << ',' << format_number(t.fraction_a) << ',' << format_number(t.fraction_b) << ','
        << format_number(t.reduction_a) << ',' << format_number(t.reduction_b) << ','
        << format_number(t.reduction_total) << ',' << t.stop_reason << '\n';
    return out.str();
}

} // namespace dalr::report
