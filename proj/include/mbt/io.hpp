#pragma once

#include <string>

#include "json.hpp"

#include "mbt/sim.hpp"
#include "mbt/tree.hpp"

namespace mbt {

using Json = nlohmann::json;

// Non-finite doubles are written as the strings "inf", "-inf", "nan".
Json num_to_json(double v);
double num_from_json(const Json& j);

Json leaf_spec_to_json(const LeafModelSpec& spec);
LeafModelSpec leaf_spec_from_json(const Json& j, LeafModelSpec base = {});

Json config_to_json(const MbtConfig& config);
// Keys present in `j` override `base`; unknown keys raise ConfigError.
MbtConfig config_from_json(const Json& j, MbtConfig base = {});

Json layout_to_json(const DesignLayout& layout);
DesignLayout layout_from_json(const Json& j);

// Coefficients keyed by design-column label.
Json model_to_json(const FittedLeafModel& model, const DesignLayout& layout);
FittedLeafModel model_from_json(const Json& j, const DesignLayout& layout);

Json tree_to_json(const MbtTree& tree);
MbtTree tree_from_json(const Json& j);
MbtTree load_tree(const std::string& path);

// Columns a tree reads at prediction time.
Schema tree_schema(const MbtTree& tree);

// Indented text view: rules on internal nodes, intercept plus the largest
// `top` coefficients on leaves.
std::string render_tree(const MbtTree& tree, int top = 3);

Json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const Json& j, ScenarioSpec base = {});

Json fidelity_config_to_json(const FidelityStudyConfig& config);
Json bias_config_to_json(const BiasStudyConfig& config);
Json stability_config_to_json(const StabilityConfig& config);

// Tidy CSV, one row per run x setting x metric. The first line is
// "# " followed by the compact config JSON.
std::string fidelity_csv(const FidelityStudy& study, const Json& config);
Json fidelity_summary_json(const FidelityStudy& study, const Json& config);
std::string fidelity_table(const FidelityStudy& study);

std::string bias_csv(const BiasReport& report, const Json& config);
Json bias_summary_json(const BiasReport& report, const Json& config);
std::string bias_table(const BiasReport& report);

std::string stability_csv(const StabilityReport& report, const Json& config);
Json stability_summary_json(const StabilityReport& report, const Json& config);
std::string stability_table(const StabilityReport& report);

std::string format_number(double v);
std::string csv_escape(const std::string& s);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace mbt
