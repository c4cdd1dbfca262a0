#pragma once

#include <filesystem>

#include "hdgm/emfit.hpp"

namespace hdgm::io {

// Versioned self-describing fit artifact (JSON). Stores the model spec, the
// parameters with their standardization moments, the report and the smoothed
// latent states, so predict/scenario/diagnose need only this file plus data.
void save_fit(const std::filesystem::path& path, const FitResult& fit);
FitResult load_fit(const std::filesystem::path& path);

}  // namespace hdgm::io
