#pragma once

#include <cmath>
#include <cstddef>
#include <new>
#include <stdexcept>
#include <vector>

namespace pcreal {

/// 64-byte aligned allocator. Keeping every tensor buffer identically
/// aligned keeps Eigen's vectorized kernels on one code path, so results do
/// not depend on heap history and training runs are bit-reproducible.
template <typename T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAlloc() = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAlloc<U>&) const {
    return true;
  }
};

/// Dense row-major tensor of rank 1..3. Unused trailing dims are 1.
template <typename T>
struct TensorT {
  int rank = 0;
  int d0 = 0, d1 = 1, d2 = 1;
  std::vector<T, AlignedAlloc<T>> v;

  TensorT() = default;

  static TensorT zeros(int a) { return TensorT(1, a, 1, 1); }
  static TensorT zeros(int a, int b) { return TensorT(2, a, b, 1); }
  static TensorT zeros(int a, int b, int c) { return TensorT(3, a, b, c); }

  std::size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& at(int i) { return v[i]; }
  T at(int i) const { return v[i]; }
  T& at(int i, int j) { return v[std::size_t(i) * d1 + j]; }
  T at(int i, int j) const { return v[std::size_t(i) * d1 + j]; }
  T& at(int i, int j, int k) { return v[(std::size_t(i) * d1 + j) * d2 + k]; }
  T at(int i, int j, int k) const { return v[(std::size_t(i) * d1 + j) * d2 + k]; }

  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(double(x))) return false;
    return true;
  }

  void check_shape(int a, int b) const {
    if (rank != 2 || d0 != a || d1 != b) throw std::logic_error("tensor shape mismatch");
  }

 private:
  TensorT(int r, int a, int b, int c) : rank(r), d0(a), d1(b), d2(c) {
    v.assign(std::size_t(a) * b * c, T(0));
  }
};

using Tensor = TensorT<float>;

}  // namespace pcreal
