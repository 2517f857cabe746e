#pragma once

#include <optional>
#include <string>

#include "bignn/classifier.hpp"
#include "bignn/denoise.hpp"

namespace bignn {

// On-disk container: a trained ensemble plus, optionally, its denoised
// accelerator. Versioned binary format with magic "BNNM"; indexes are
// rebuilt deterministically on load.
struct ModelBundle {
    BigNnModel model;
    std::optional<DenoisedModel> denoised;
};

void save_model(const std::string& path, const BigNnModel& model,
                const DenoisedModel* denoised = nullptr);

ModelBundle load_model(const std::string& path);

}  // namespace bignn
