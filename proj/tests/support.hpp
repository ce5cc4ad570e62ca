#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "causalaid/tabular.hpp"

namespace causalaid::testing {

inline StudyFrame frame_from(const Table& t, const std::string& treatment, const std::string& outcome,
                             const std::vector<std::string>& covariates) {
  const auto n = static_cast<Eigen::Index>(t.rows());
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t j = 0; j < covariates.size(); ++j)
    z.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(t.column(covariates[j]).numbers.data(), n);
  return StudyFrame::create(Eigen::Map<const Eigen::VectorXd>(t.column(treatment).numbers.data(), n),
                            Eigen::Map<const Eigen::VectorXd>(t.column(outcome).numbers.data(), n), z, covariates);
}

inline std::string data_path(const std::string& name) {
  return (std::filesystem::path(CAUSALAID_DATA_DIR) / name).string();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("causalaid-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace causalaid::testing
