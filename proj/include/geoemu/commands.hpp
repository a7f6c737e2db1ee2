#pragma once

#include <string>

#include "geoemu/config.hpp"

namespace geoemu::cmd {

using cfg::json;

// Each command consumes a resolved config, writes its artifacts (plus the
// resolved config itself) under out_dir, and returns a machine-readable
// summary of the numeric results.
json cmd_synth(const json& config, const std::string& out_dir);
json cmd_train(const json& config, const std::string& out_dir);
json cmd_evaluate(const json& config, const std::string& out_dir);
json cmd_forecast(const json& config, const std::string& out_dir);
json cmd_eof(const json& config, const std::string& out_dir);
json cmd_plot(const json& config, const std::string& out_dir);
// Benchmark matrix: four static architectures, four UNet predictor windows,
// and persistence/AR-1/AR-6 forecasting at leads 1..11, consolidated into
// one report (no timestamps, so reruns are byte-identical).
json cmd_suite(const json& config, const std::string& out_dir);

json run_command(const std::string& name, const json& config,
                 const std::string& out_dir);

}  // namespace geoemu::cmd
