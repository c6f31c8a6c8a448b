#pragma once

#include "dustat/estimators.hpp"
#include "dustat/learners.hpp"

#include <json.hpp>

#include <string>

namespace dustat {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const EstimateResult& r);
/// Inverse of to_json; throws ConfigError on a schema mismatch.
EstimateResult estimate_from_json(const nlohmann::json& j);

std::string estimate_csv_header();
std::string estimate_csv_row(const EstimateResult& r);

/// Kind, hyperparameters and coefficients or forest size.
nlohmann::json model_summary(const FittedModel& model);

}  // namespace dustat
