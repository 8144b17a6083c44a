#pragma once

#include <string>

#include "plants/model.hpp"
#include "plants/training.hpp"

namespace plants {

// Versioned binary checkpoint, magic "PLANTS01": config block (widths, depth,
// seed), then declared arrays in order — standardizer mean, standardizer std,
// model parameters as returned by PlantsModel::parameters(). Little-endian
// f64 payloads; loading validates every shape against the config.
void save_checkpoint(const std::string& path, const PlantsModel& model,
                     const Standardizer& standardizer);

struct LoadedCheckpoint {
  PlantsModel model;
  Standardizer standardizer;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace plants
