#ifndef SUBNORM_TESTS_HELPERS_HPP
#define SUBNORM_TESTS_HELPERS_HPP

#include <filesystem>
#include <string>

#include "subnorm/random.hpp"
#include "subnorm/tensor.hpp"

namespace testing_helpers {

inline subnorm::Tensor random_tensor(const subnorm::Shape& shape, std::uint64_t seed) {
  subnorm::Rng rng(seed);
  return rng.gaussian_tensor(shape);
}

inline subnorm::Matrix random_matrix(subnorm::Index rows, subnorm::Index cols, std::uint64_t seed) {
  subnorm::Rng rng(seed);
  return rng.gaussian_matrix(rows, cols);
}

inline double max_abs_diff(const subnorm::Matrix& a, const subnorm::Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("subnorm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_helpers

#endif  // SUBNORM_TESTS_HELPERS_HPP
