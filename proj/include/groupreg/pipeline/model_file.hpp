#pragma once

// Binary model files: "AIMD", u32 version, u32-length-prefixed UTF-8 JSON
// descriptor, f32 parameters in layer order (weight then bias), CRC32 of
// everything before it. All integers little-endian.

#include <cstddef>
#include <filesystem>
#include <string>

#include "groupreg/edge.hpp"
#include "groupreg/losses.hpp"
#include "groupreg/model.hpp"

namespace groupreg {

inline constexpr std::uint32_t kModelFileVersion = 1;

/// A trained registration network together with what it was trained for.
struct RegistrationModel {
    RegistrationNet<float> net;
    Variant variant = Variant::aim_ed;
    LossConfig loss;
    std::size_t k = 0;  // sources per group during training; 0 if unknown
};

enum class ModelKind { registration, edge_detector };

/// Kind recorded in a model file, after magic/version/CRC checks.
ModelKind peek_model_kind(const std::filesystem::path& file);

void save_model(const std::filesystem::path& file, const RegistrationModel& model);
void save_model(const std::filesystem::path& file, const EdgeDetector<float>& detector);

/// FormatError on bad magic, version or kind; ChecksumError on truncation or
/// a CRC mismatch; DataError when the file cannot be read.
RegistrationModel load_registration_model(const std::filesystem::path& file);
EdgeDetector<float> load_edge_detector(const std::filesystem::path& file);

}  // namespace groupreg
