#pragma once
// Binary tensor file format:
//   magic "SWUT" | version u16 LE | dtype u8 (0=float32, 1=int32) |
//   rank u8 | extents u64 LE each | payload row-major LE
// Writes and reads are bit-exact round trips.

#include "swu/field.hpp"

#include <string>

namespace swu {

constexpr uint16_t kTensorFormatVersion = 1;

struct TensorData {
    uint8_t dtype = 0;  // 0 = float32, 1 = int32
    Shape shape;
    std::vector<float> f32;
    std::vector<int32_t> i32;
};

void write_tensor(const std::string& path, const TensorData& tensor);
void write_tensor(const std::string& path, const DenseField& field);
void write_tensor(const std::string& path, const LabelField& labels);
TensorData read_tensor(const std::string& path);

// Typed readers; throw IoError when the stored dtype does not match.
DenseField read_field(const std::string& path);
LabelField read_labels(const std::string& path);

}  // namespace swu
