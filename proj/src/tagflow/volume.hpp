#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace tagflow {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
    bool operator==(const Vec3&) const = default;
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }

// Geometry of a regular 3D lattice. Voxel (i,j,k) sits at
// origin + (i*sx, j*sy, k*sz); storage is x-fastest.
class Grid3 {
public:
    Grid3() = default;
    Grid3(std::array<int, 3> dims, Vec3 spacing, Vec3 origin = {});

    const std::array<int, 3>& dims() const { return dims_; }
    int dim(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }

    std::size_t size() const
    {
        return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
               static_cast<std::size_t>(dims_[2]);
    }
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
    }
    Vec3 world(int i, int j, int k) const
    {
        return {origin_.x + i * spacing_.x, origin_.y + j * spacing_.y, origin_.z + k * spacing_.z};
    }
    // Continuous voxel coordinate of a world point.
    Vec3 continuous_index(const Vec3& p) const
    {
        return {(p.x - origin_.x) / spacing_.x, (p.y - origin_.y) / spacing_.y, (p.z - origin_.z) / spacing_.z};
    }
    double min_spacing() const;
    // True when voxel (i,j,k) is at least `margin` voxels from every face.
    bool interior(int i, int j, int k, int margin) const
    {
        return i >= margin && j >= margin && k >= margin && i < dims_[0] - margin && j < dims_[1] - margin &&
               k < dims_[2] - margin;
    }

    bool operator==(const Grid3&) const = default;

private:
    std::array<int, 3> dims_{2, 2, 2};
    Vec3 spacing_{1.0, 1.0, 1.0};
    Vec3 origin_{};
};

// Throws "grid mismatch" unless a == b.
void require_same_grid(const Grid3& a, const Grid3& b);

class ScalarVolume {
public:
    ScalarVolume() = default;
    explicit ScalarVolume(const Grid3& grid, double fill = 0.0);
    ScalarVolume(const Grid3& grid, std::vector<double> values);

    const Grid3& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }

    double operator[](std::size_t n) const { return values_[n]; }
    double& operator[](std::size_t n) { return values_[n]; }
    double at(int i, int j, int k) const { return values_[grid_.index(i, j, k)]; }
    double& at(int i, int j, int k) { return values_[grid_.index(i, j, k)]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    bool all_finite() const;

private:
    Grid3 grid_;
    std::vector<double> values_;
};

enum class FieldKind { displacement, velocity };

const char* to_string(FieldKind kind);

// Vector field in physical millimetres. The kind is fixed at construction;
// operations that only make sense for one kind check it.
class VectorVolume {
public:
    VectorVolume() = default;
    VectorVolume(const Grid3& grid, FieldKind kind, Vec3 fill = {});
    VectorVolume(const Grid3& grid, FieldKind kind, std::vector<Vec3> values);

    const Grid3& grid() const { return grid_; }
    FieldKind kind() const { return kind_; }
    std::size_t size() const { return values_.size(); }

    const Vec3& operator[](std::size_t n) const { return values_[n]; }
    Vec3& operator[](std::size_t n) { return values_[n]; }
    const Vec3& at(int i, int j, int k) const { return values_[grid_.index(i, j, k)]; }
    Vec3& at(int i, int j, int k) { return values_[grid_.index(i, j, k)]; }

    std::span<const Vec3> values() const { return values_; }
    std::span<Vec3> values() { return values_; }

    // Copy of the same samples reinterpreted as another kind.
    VectorVolume with_kind(FieldKind kind) const { return VectorVolume(grid_, kind, values_); }
    ScalarVolume component(int axis) const;
    double max_norm() const;
    bool all_finite() const;

private:
    Grid3 grid_;
    FieldKind kind_ = FieldKind::displacement;
    std::vector<Vec3> values_;
};

void require_kind(const VectorVolume& v, FieldKind kind, const char* op);

} // namespace tagflow
