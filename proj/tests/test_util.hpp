#pragma once

#include <unistd.h>

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace disko_test {

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng,
                                     double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) M(r, c) = scale * gauss(rng);
  return M;
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * gauss(rng);
  return v;
}

// Random matrix rescaled to the requested spectral radius.
inline Eigen::MatrixXd random_with_radius(int n, std::mt19937_64& rng, double radius) {
  Eigen::MatrixXd M = random_matrix(n, n, rng);
  const double sr = M.eigenvalues().cwiseAbs().maxCoeff();
  return M * (radius / sr);
}

// Scratch directory unique to one test body; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("disko_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace disko_test
