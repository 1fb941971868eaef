#pragma once

#include <atomic>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <memory>
#include <new>
#include <numeric>
#include <stdexcept>
#include <type_traits>
#include <string>
#include <vector>

namespace psgan {

// Live-byte accounting for every Tensor allocation. The sampler's
// constant-memory contract is asserted against these counters, so all
// network workspaces must live in Tensors (images and other plain buffers
// are deliberately not counted).
struct MemStats {
  static std::atomic<std::size_t>& current() {
    static std::atomic<std::size_t> v{0};
    return v;
  }
  static std::atomic<std::size_t>& peak() {
    static std::atomic<std::size_t> v{0};
    return v;
  }
  static void add(std::size_t n) {
    std::size_t cur = current().fetch_add(n) + n;
    std::size_t pk = peak().load();
    while (cur > pk && !peak().compare_exchange_weak(pk, cur)) {
    }
  }
  static void sub(std::size_t n) { current().fetch_sub(n); }
  static void reset_peak() { peak().store(current().load()); }
};

// Dense row-major tensor. Value semantics: copies are deep.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    size_ = 1;
    for (int64_t d : shape_) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      size_ *= d;
    }
    allocate();
    std::memset(data_.get(), 0, sizeof(T) * static_cast<std::size_t>(size_));
  }

  Tensor(std::initializer_list<int64_t> shape)
      : Tensor(std::vector<int64_t>(shape)) {}

  Tensor(const Tensor& other) : shape_(other.shape_), size_(other.size_) {
    allocate();
    std::memcpy(data_.get(), other.data_.get(),
                sizeof(T) * static_cast<std::size_t>(size_));
  }

  Tensor(Tensor&& other) noexcept { swap(other); }

  Tensor& operator=(const Tensor& other) {
    if (this != &other) {
      Tensor tmp(other);
      swap(tmp);
    }
    return *this;
  }

  Tensor& operator=(Tensor&& other) noexcept {
    if (this != &other) {
      release();
      swap(other);
    }
    return *this;
  }

  ~Tensor() { release(); }

  static Tensor full(std::vector<int64_t> shape, T value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  void fill(T value) {
    for (int64_t i = 0; i < size_; ++i) data_[i] = value;
  }
  void zero() {
    if (size_)
      std::memset(data_.get(), 0, sizeof(T) * static_cast<std::size_t>(size_));
  }

  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t numel() const { return size_; }
  bool empty() const { return size_ == 0; }

  T* data() { return data_.get(); }
  const T* data() const { return data_.get(); }

  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }

  // (a,b) for 2-D, (c,h,w) for 3-D, (n,c,h,w) for 4-D tensors.
  T& at(int64_t a, int64_t b) { return data_[a * shape_[1] + b]; }
  const T& at(int64_t a, int64_t b) const { return data_[a * shape_[1] + b]; }
  T& at(int64_t a, int64_t b, int64_t c) {
    return data_[(a * shape_[1] + b) * shape_[2] + c];
  }
  const T& at(int64_t a, int64_t b, int64_t c) const {
    return data_[(a * shape_[1] + b) * shape_[2] + c];
  }
  T& at(int64_t a, int64_t b, int64_t c, int64_t d) {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  const T& at(int64_t a, int64_t b, int64_t c, int64_t d) const {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void reshape(std::vector<int64_t> shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    if (n != size_) throw std::invalid_argument("Tensor::reshape: numel mismatch");
    shape_ = std::move(shape);
  }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  // Fixed 64-byte alignment keeps vectorized reductions bitwise reproducible:
  // with plain new[] the SIMD peel length would vary with heap layout, so the
  // same training run could differ in the last ulp between invocations.
  struct AlignedDelete {
    void operator()(T* p) const noexcept {
      ::operator delete[](p, std::align_val_t{64});
    }
  };

  void allocate() {
    static_assert(std::is_trivial_v<T>, "Tensor requires a trivial element type");
    if (size_ > 0) {
      void* raw = ::operator new[](sizeof(T) * static_cast<std::size_t>(size_),
                                   std::align_val_t{64});
      data_.reset(static_cast<T*>(raw));
      MemStats::add(sizeof(T) * static_cast<std::size_t>(size_));
    }
  }
  void release() {
    if (data_) {
      MemStats::sub(sizeof(T) * static_cast<std::size_t>(size_));
      data_.reset();
    }
    shape_.clear();
    size_ = 0;
  }
  void swap(Tensor& other) noexcept {
    shape_.swap(other.shape_);
    std::swap(size_, other.size_);
    data_.swap(other.data_);
  }

  std::vector<int64_t> shape_;
  int64_t size_ = 0;
  std::unique_ptr<T[], AlignedDelete> data_;
};

}  // namespace psgan
