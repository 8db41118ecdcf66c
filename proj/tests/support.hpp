#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "tagflow/volume.hpp"

namespace tagflow::test {

inline Grid3 grid(int nx, int ny, int nz, Vec3 spacing = {1.0, 1.0, 1.0}, Vec3 origin = {})
{
    return Grid3({nx, ny, nz}, spacing, origin);
}

inline ScalarVolume scalar_field(const Grid3& g, const std::function<double(const Vec3&)>& f)
{
    ScalarVolume v(g);
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i)
                v.at(i, j, k) = f(g.world(i, j, k));
    return v;
}

inline VectorVolume vector_field(const Grid3& g, FieldKind kind, const std::function<Vec3(const Vec3&)>& f)
{
    VectorVolume v(g, kind);
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i)
                v.at(i, j, k) = f(g.world(i, j, k));
    return v;
}

// Largest |f(i,j,k)| over voxels at least `margin` from every face.
template <class F>
double interior_max(const Grid3& g, int margin, F f)
{
    double worst = 0.0;
    for (int k = margin; k < g.dim(2) - margin; ++k)
        for (int j = margin; j < g.dim(1) - margin; ++j)
            for (int i = margin; i < g.dim(0) - margin; ++i)
                worst = std::max(worst, std::abs(f(i, j, k)));
    return worst;
}

inline double max_diff(const VectorVolume& a, const VectorVolume& b, int margin = 0)
{
    return interior_max(a.grid(), margin, [&](int i, int j, int k) { return (a.at(i, j, k) - b.at(i, j, k)).norm(); });
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("tagflow_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace tagflow::test
