#pragma once

#include <filesystem>

#include <json.hpp>

#include "mctopo/gp.hpp"

namespace mctopo::gp {

nlohmann::json to_json(const MrLvgpModel& model, const nlohmann::json& meta = nlohmann::json::object());
/// Rebuilds the factorization from the stored hyperparameters and training data and
/// checks it against the stored Bhat / SigmaHat.
MrLvgpModel from_json(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const MrLvgpModel& model,
                const nlohmann::json& meta = nlohmann::json::object());
MrLvgpModel load_model(const std::filesystem::path& path);

}  // namespace mctopo::gp
