#include "tagflow/volume.hpp"

#include <algorithm>
#include <string>

#include "tagflow/error.hpp"

namespace tagflow {

Grid3::Grid3(std::array<int, 3> dims, Vec3 spacing, Vec3 origin) : dims_(dims), spacing_(spacing), origin_(origin)
{
    for (int a = 0; a < 3; ++a) {
        if (dims_[static_cast<std::size_t>(a)] < 2)
            fail(ErrorKind::invalid_argument, "grid dimensions must be >= 2");
        if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a]))
            fail(ErrorKind::invalid_argument, "grid spacing must be positive");
        if (!std::isfinite(origin_[a]))
            fail(ErrorKind::invalid_argument, "grid origin must be finite");
    }
}

double Grid3::min_spacing() const { return std::min({spacing_.x, spacing_.y, spacing_.z}); }

void require_same_grid(const Grid3& a, const Grid3& b)
{
    if (!(a == b))
        fail(ErrorKind::invalid_argument, "grid mismatch");
}

ScalarVolume::ScalarVolume(const Grid3& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

ScalarVolume::ScalarVolume(const Grid3& grid, std::vector<double> values) : grid_(grid), values_(std::move(values))
{
    if (values_.size() != grid_.size())
        fail(ErrorKind::invalid_argument, "value count does not match grid");
}

bool ScalarVolume::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

const char* to_string(FieldKind kind) { return kind == FieldKind::displacement ? "displacement" : "velocity"; }

VectorVolume::VectorVolume(const Grid3& grid, FieldKind kind, Vec3 fill)
    : grid_(grid), kind_(kind), values_(grid.size(), fill)
{
}

VectorVolume::VectorVolume(const Grid3& grid, FieldKind kind, std::vector<Vec3> values)
    : grid_(grid), kind_(kind), values_(std::move(values))
{
    if (values_.size() != grid_.size())
        fail(ErrorKind::invalid_argument, "value count does not match grid");
}

ScalarVolume VectorVolume::component(int axis) const
{
    ScalarVolume out(grid_);
    for (std::size_t n = 0; n < values_.size(); ++n)
        out[n] = values_[n][axis];
    return out;
}

double VectorVolume::max_norm() const
{
    double m = 0.0;
    for (const auto& v : values_)
        m = std::max(m, v.norm());
    return m;
}

bool VectorVolume::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](const Vec3& v) { return v.finite(); });
}

void require_kind(const VectorVolume& v, FieldKind kind, const char* op)
{
    if (v.kind() != kind)
        fail(ErrorKind::invalid_argument,
             std::string(op) + " expects a " + to_string(kind) + " field, got " + to_string(v.kind()));
}

} // namespace tagflow
