#pragma once

#include "airsvr/matrix.hpp"

#include <optional>
#include <span>
#include <string>

namespace airsvr {

enum class KernelType { Rbf, Polynomial };

// RBF: exp(-gamma |x - y|^2). Polynomial: (gamma <x, y> + coef0)^degree.
struct KernelSpec {
    KernelType type = KernelType::Rbf;
    double gamma = 1.0;
    int degree = 3;     // polynomial only
    double coef0 = 1.0; // polynomial only

    static KernelSpec rbf(double gamma);
    static KernelSpec polynomial(int degree, double gamma, double coef0);

    // Throws InputError when gamma <= 0, degree < 1 or coef0 < 0.
    void validate() const;

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

// A kernel whose gamma may be left to the data-driven default.
struct KernelChoice {
    KernelType type = KernelType::Rbf;
    std::optional<double> gamma;
    int degree = 3;
    double coef0 = 1.0;

    // Fills in gamma from the training matrix when unset.
    KernelSpec resolve(const Matrix& x) const;

    friend bool operator==(const KernelChoice&, const KernelChoice&) = default;
};

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

// m x m kernel matrix over the rows of x. The lower triangle is a copy of the upper one.
Matrix gram_matrix(const KernelSpec& spec, const Matrix& x);
inline Matrix gram_matrix(const KernelSpec& spec, const FeatureMatrix& x) {
    return gram_matrix(spec, x.values);
}

// 1 / (d * mean per-feature population variance). Falls back to 1/d for a zero-variance matrix.
double default_rbf_gamma(const Matrix& x);
// degree 3, gamma 1/d, coef0 1.
KernelSpec default_polynomial(Eigen::Index feature_count);

std::string kernel_name(KernelType type);   // "rbf" | "poly"
KernelType parse_kernel_type(const std::string& name);

// Compact textual form with hex-float gamma/coef0, e.g. "poly:3:0x1p-1:0x1p+0".
std::string to_string(const KernelSpec& spec);
KernelSpec kernel_from_string(const std::string& text);

}  // namespace airsvr
