#pragma once
// Dense N-D float fields with (batch, channel, spatial...) layout.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace swu {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Shape/channel mismatches and malformed inputs.
struct ShapeError : Error {
    using Error::Error;
};
// Non-finite values escaping a public operation.
struct NumericError : Error {
    using Error::Error;
};
// File format and serialization failures.
struct IoError : Error {
    using Error::Error;
};
// Invalid or inconsistent configuration.
struct ConfigError : Error {
    using Error::Error;
};

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Row-major float32 field. First dim is batch, second is channels,
// remaining 1-3 dims are the spatial lattice.
struct DenseField {
    Shape shape;
    std::vector<float> data;

    DenseField() = default;
    DenseField(Shape s, float fill = 0.0f);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t batch() const { return shape.empty() ? 0 : shape[0]; }
    int64_t channels() const { return shape.size() < 2 ? 0 : shape[1]; }
    int64_t spatial_numel() const;
    Shape spatial_extents() const;

    float& at(std::initializer_list<int64_t> idx);
    float at(std::initializer_list<int64_t> idx) const;

    // Throws NumericError if any element is NaN/Inf.
    void ensure_finite(const std::string& context) const;
};

// Integer-valued label field with (batch, spatial...) layout.
struct LabelField {
    Shape shape;
    std::vector<int32_t> data;

    LabelField() = default;
    LabelField(Shape s, int32_t fill = 0);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
};

// Per-voxel argmax over channels; ties resolve to the lowest class index.
LabelField argmax_channel(const DenseField& f);

bool same_shape(const Shape& a, const Shape& b);
void require_shape(const Shape& got, const Shape& want, const std::string& context);

}  // namespace swu
