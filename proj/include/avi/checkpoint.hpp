#pragma once

#include <filesystem>
#include <string>

#include "avi/config.hpp"
#include "avi/nn/params.hpp"

namespace avi::train {

// Everything a checkpoint stores, by reference.
struct CheckpointView {
  TrainConfig* config = nullptr;
  long long* step = nullptr;
  nn::ParamStore* backbone = nullptr;
  nn::ParamStore* gamr = nullptr;
  nn::Adam* opt_backbone = nullptr;
  nn::Adam* opt_gamr = nullptr;
};

// Writes <dir>/params.json plus one AVK1 file per tensor. Returns the content checksum.
std::string save_checkpoint(const std::filesystem::path& dir, const CheckpointView& v);

// Loads into `v`. Rejects checksum failures and any architecture field or
// parameter shape that differs from the stores already in `v`.
void load_checkpoint(const std::filesystem::path& dir, CheckpointView& v);

// Checksum recorded in params.json without loading tensors.
std::string checkpoint_checksum(const std::filesystem::path& dir);

// Architecture fields compared on load.
nlohmann::json architecture(const TrainConfig& c);

}  // namespace avi::train
