#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "geoemu/diagnostics.hpp"
#include "geoemu/grid.hpp"
#include "geoemu/models.hpp"
#include "geoemu/preprocess.hpp"
#include "geoemu/training.hpp"

namespace geoemu::cfg {

using json = nlohmann::json;

// Full default configuration; the schema is exactly its key tree.
json defaults();

// Strict merge of user config over defaults: unknown keys, type mismatches
// and malformed documents all throw validation errors naming the bad path.
json resolve(const json& user);

json load_file(const std::string& path);

// Dotted-key overrides ("training.learning_rate=0.01"). Values are parsed as
// JSON when possible, otherwise taken as strings. Keys must exist in the
// schema.
void apply_overrides(json& config, const std::vector<std::string>& sets);

void write_resolved(const json& config, const std::string& dir);

// Section extractors (expect a resolved config).
SyntheticConfig synthetic_config(const json& config);
SplitSpec split_spec(const json& config);
PreprocessOptions preprocess_options(const json& config);
ArchConfig arch_config(const json& config);
Arch model_arch(const json& config);
bool model_autoregressive(const json& config);
WindowSpec window_spec(const json& config);
TrainConfig train_config(const json& config);
std::vector<BasinBox> basin_boxes(const json& config);

}  // namespace geoemu::cfg
