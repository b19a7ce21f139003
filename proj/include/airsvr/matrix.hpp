#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace airsvr {

// Row-major so that a sample is a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline std::span<const double> row_span(const Matrix& m, Eigen::Index r) {
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

// Dense rows with named columns.
struct FeatureMatrix {
    std::vector<std::string> names;
    Matrix values;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

}  // namespace airsvr
