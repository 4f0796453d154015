#pragma once

#include "attnlab/analysis.hpp"
#include "attnlab/theory.hpp"

#include <json.hpp>

#include <ostream>
#include <string>

namespace attnlab {

using nlohmann::json;

/// Formats with 17 significant digits ("%.17g"): parse(fmt17(x)) == x for all
/// finite doubles. NaN prints as "nan" (the CSV sentinel for undefined values).
std::string fmt17(double v);

/// Fixed header:
/// step,loss_hallu,loss_adv,eta_sum,beta_sum,beta_valid,grad_cosine,grad_norm_hallu,grad_norm_adv
extern const char* const kTraceCsvHeader;

void write_trace_csv(std::ostream& os, const Trace& trace);
void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep);
void write_alignment_csv(std::ostream& os, const AlignmentReport& rep);

/// JSON conversions. Non-finite doubles serialize as null and parse back to NaN.
json to_json(const GradientField& g);
GradientField gradient_field_from_json(const json& j);
json to_json(const GradientReport& r);
GradientReport gradient_report_from_json(const json& j);
json to_json(const ConvergenceReport& r);
ConvergenceReport convergence_report_from_json(const json& j);
json to_json(const AlignmentReport& r);
AlignmentReport alignment_report_from_json(const json& j);
json to_json(const TrendSummary& s);

} // namespace attnlab
