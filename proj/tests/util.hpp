#pragma once

#include <vector>

#include "psgan/tensor.hpp"

// Copy a tensor's payload into a vector for value comparisons in assertions.
template <typename T>
std::vector<T> tvec(const psgan::Tensor<T>& t) {
  return std::vector<T>(t.data(), t.data() + t.numel());
}
