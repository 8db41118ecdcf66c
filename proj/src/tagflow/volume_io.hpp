#pragma once

#include <filesystem>
#include <variant>

#include "tagflow/volume.hpp"

namespace tagflow {

// TMV1 container: "TMVOL001", then little-endian u32 kind (0 scalar,
// 1 vector3), u32 dims[3], f64 spacing[3], f64 origin[3], and an f32
// payload in x-fastest order (vectors interleaved xyz per voxel).
enum class VolumeFileKind : std::uint32_t { scalar = 0, vector3 = 1 };

void write_volume(const std::filesystem::path& path, const ScalarVolume& v);
void write_volume(const std::filesystem::path& path, const VectorVolume& v);

ScalarVolume read_scalar_volume(const std::filesystem::path& path);
// The file does not record displacement vs velocity; the caller says which.
VectorVolume read_vector_volume(const std::filesystem::path& path, FieldKind kind);

using AnyVolume = std::variant<ScalarVolume, VectorVolume>;
AnyVolume read_volume(const std::filesystem::path& path, FieldKind vector_kind = FieldKind::displacement);

} // namespace tagflow
