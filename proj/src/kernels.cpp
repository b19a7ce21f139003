#include "airsvr/kernels.hpp"

#include "airsvr/error.hpp"
#include "airsvr/numfmt.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace airsvr {

KernelSpec KernelSpec::rbf(double gamma) {
    KernelSpec k{KernelType::Rbf, gamma, 3, 1.0};
    k.validate();
    return k;
}

KernelSpec KernelSpec::polynomial(int degree, double gamma, double coef0) {
    KernelSpec k{KernelType::Polynomial, gamma, degree, coef0};
    k.validate();
    return k;
}

void KernelSpec::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw InputError("kernel gamma must be a positive finite number");
    }
    if (type == KernelType::Polynomial) {
        if (degree < 1) throw InputError("polynomial kernel degree must be >= 1");
        if (!(coef0 >= 0.0) || !std::isfinite(coef0)) {
            throw InputError("polynomial kernel coef0 must be >= 0");
        }
    }
}

KernelSpec KernelChoice::resolve(const Matrix& x) const {
    if (type == KernelType::Rbf) {
        return KernelSpec::rbf(gamma ? *gamma : default_rbf_gamma(x));
    }
    const double g = gamma ? *gamma : 1.0 / static_cast<double>(std::max<Eigen::Index>(x.cols(), 1));
    return KernelSpec::polynomial(degree, g, coef0);
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) {
        throw InputError("kernel_eval: vectors must share a non-zero dimension (got " +
                         std::to_string(x.size()) + " and " + std::to_string(y.size()) + ")");
    }
    if (spec.type == KernelType::Rbf) {
        double sq = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double d = x[k] - y[k];
            sq += d * d;
        }
        return std::exp(-spec.gamma * sq);
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * y[k];
    const double base = spec.gamma * dot + spec.coef0;
    double out = 1.0;
    for (int p = 0; p < spec.degree; ++p) out *= base;
    return out;
}

Matrix gram_matrix(const KernelSpec& spec, const Matrix& x) {
    if (x.rows() == 0) throw InputError("gram_matrix: empty feature matrix");
    const Eigen::Index m = x.rows();
    Matrix g(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto xi = row_span(x, i);
        for (Eigen::Index j = i; j < m; ++j) {
            const double v = kernel_eval(spec, xi, row_span(x, j));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

double default_rbf_gamma(const Matrix& x) {
    const auto d = static_cast<double>(std::max<Eigen::Index>(x.cols(), 1));
    if (x.rows() == 0) return 1.0 / d;
    double var_sum = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double mean = x.col(c).mean();
        var_sum += (x.col(c).array() - mean).square().mean();
    }
    const double mean_var = var_sum / d;
    if (!(mean_var > 0.0)) return 1.0 / d;
    return 1.0 / (d * mean_var);
}

KernelSpec default_polynomial(Eigen::Index feature_count) {
    return KernelSpec::polynomial(3, 1.0 / static_cast<double>(std::max<Eigen::Index>(feature_count, 1)), 1.0);
}

std::string kernel_name(KernelType type) {
    return type == KernelType::Rbf ? "rbf" : "poly";
}

KernelType parse_kernel_type(const std::string& name) {
    if (name == "rbf") return KernelType::Rbf;
    if (name == "poly" || name == "polynomial") return KernelType::Polynomial;
    throw InputError("unknown kernel '" + name + "' (expected rbf or poly)");
}

std::string to_string(const KernelSpec& spec) {
    if (spec.type == KernelType::Rbf) return "rbf:" + hex_double(spec.gamma);
    return "poly:" + std::to_string(spec.degree) + ":" + hex_double(spec.gamma) + ":" + hex_double(spec.coef0);
}

KernelSpec kernel_from_string(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.empty()) throw ParseError("empty kernel description", 0, "kernel");
    const KernelType type = parse_kernel_type(parts[0]);
    try {
        if (type == KernelType::Rbf && parts.size() == 2) {
            return KernelSpec::rbf(parse_double(parts[1]));
        }
        if (type == KernelType::Polynomial && parts.size() == 4) {
            return KernelSpec::polynomial(std::stoi(parts[1]), parse_double(parts[2]), parse_double(parts[3]));
        }
    } catch (const std::logic_error&) {
    }
    throw ParseError("malformed kernel description '" + text + "'", 0, "kernel");
}

}  // namespace airsvr
