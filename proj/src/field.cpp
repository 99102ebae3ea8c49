#include "swu/field.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace swu {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t e : shape) {
        if (e <= 0) return 0;
        n *= e;
    }
    return shape.empty() ? 0 : n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

DenseField::DenseField(Shape s, float fill) : shape(std::move(s)) {
    if (shape.size() < 2 || shape.size() > 5)
        throw ShapeError("DenseField rank must be in [2,5], got " + shape_str(shape));
    for (int64_t e : shape)
        if (e <= 0) throw ShapeError("DenseField extents must be positive: " + shape_str(shape));
    data.assign(static_cast<size_t>(shape_numel(shape)), fill);
}

int64_t DenseField::spatial_numel() const {
    int64_t n = 1;
    for (size_t i = 2; i < shape.size(); ++i) n *= shape[i];
    return n;
}

Shape DenseField::spatial_extents() const {
    return Shape(shape.begin() + std::min<size_t>(2, shape.size()), shape.end());
}

static int64_t flat_index(const Shape& shape, std::initializer_list<int64_t> idx) {
    if (idx.size() != shape.size())
        throw ShapeError("index rank mismatch for shape " + shape_str(shape));
    int64_t flat = 0;
    size_t d = 0;
    for (int64_t i : idx) {
        if (i < 0 || i >= shape[d]) throw ShapeError("index out of range in dim " + std::to_string(d));
        flat = flat * shape[d] + i;
        ++d;
    }
    return flat;
}

float& DenseField::at(std::initializer_list<int64_t> idx) {
    return data[static_cast<size_t>(flat_index(shape, idx))];
}

float DenseField::at(std::initializer_list<int64_t> idx) const {
    return data[static_cast<size_t>(flat_index(shape, idx))];
}

void DenseField::ensure_finite(const std::string& context) const {
    for (float v : data)
        if (!std::isfinite(v))
            throw NumericError("non-finite value in " + context);
}

LabelField::LabelField(Shape s, int32_t fill) : shape(std::move(s)) {
    if (shape.empty())
        throw ShapeError("LabelField needs at least one extent");
    for (int64_t e : shape)
        if (e <= 0) throw ShapeError("LabelField extents must be positive: " + shape_str(shape));
    data.assign(static_cast<size_t>(shape_numel(shape)), fill);
}

LabelField argmax_channel(const DenseField& f) {
    const int64_t b = f.batch(), c = f.channels(), s = f.spatial_numel();
    Shape out_shape;
    out_shape.push_back(b);
    for (size_t i = 2; i < f.shape.size(); ++i) out_shape.push_back(f.shape[i]);
    LabelField out(out_shape, 0);
    for (int64_t n = 0; n < b; ++n) {
        const float* base = f.data.data() + n * c * s;
        int32_t* dst = out.data.data() + n * s;
        for (int64_t i = 0; i < s; ++i) {
            float best = base[i];
            int32_t best_c = 0;
            for (int64_t k = 1; k < c; ++k) {
                const float v = base[k * s + i];
                if (v > best) {
                    best = v;
                    best_c = static_cast<int32_t>(k);
                }
            }
            dst[i] = best_c;
        }
    }
    return out;
}

bool same_shape(const Shape& a, const Shape& b) {
    return a == b;
}

void require_shape(const Shape& got, const Shape& want, const std::string& context) {
    if (!same_shape(got, want))
        throw ShapeError(context + ": shape " + shape_str(got) + " does not match " + shape_str(want));
}

}  // namespace swu
