#pragma once

#include <filesystem>
#include <string>

#include "aabcos/metrics.hpp"
#include "aabcos/training.hpp"

namespace aabcos {

// Flat key=value run configuration merging model topology, training,
// augmentation and EPG settings. Unknown keys are rejected; the resolved
// configuration is echoed next to every run's outputs.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    EpgConfig epg;

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
    void write_resolved(const std::filesystem::path& path) const;
    std::string resolved_text() const;
};

}  // namespace aabcos
