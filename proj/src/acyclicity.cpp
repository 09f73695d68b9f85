#include "dbn/acyclicity.hpp"

#include <cmath>
#include <limits>

namespace dbn {

namespace {

void require_square(const Eigen::MatrixXd& w) {
    if (w.rows() != w.cols()) fail(ErrorKind::dimension, "weight matrix must be square");
    if (!w.allFinite()) fail(ErrorKind::range, "weight matrix has non-finite entries");
}

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) fail(ErrorKind::dimension, "expm needs a square matrix");
    constexpr int kDegree = 18;
    const Eigen::Index n = a.rows();
    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Eigen::MatrixXd scaled = a / std::ldexp(1.0, squarings);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    // Horner: I + A(I + A/2(I + A/3(...))).
    Eigen::MatrixXd result = eye;
    for (int k = kDegree; k >= 1; --k) result = eye + (scaled * result) / static_cast<double>(k);
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

double h_expm(const Eigen::MatrixXd& w) {
    require_square(w);
    return expm(w.cwiseProduct(w)).trace() - static_cast<double>(w.rows());
}

Eigen::MatrixXd h_expm_grad(const Eigen::MatrixXd& w) {
    require_square(w);
    return 2.0 * expm(w.cwiseProduct(w)).transpose().cwiseProduct(w);
}

AcyclicityValue h_expm_value(const Eigen::MatrixXd& w) {
    require_square(w);
    const Eigen::MatrixXd e = expm(w.cwiseProduct(w));
    return {e.trace() - static_cast<double>(w.rows()), 2.0 * e.transpose().cwiseProduct(w)};
}

AcyclicityValue h_poly(const Eigen::MatrixXd& w, double mu) {
    require_square(w);
    if (!(mu > 0.0)) fail(ErrorKind::range, "mu must be positive");
    const Eigen::Index d = w.rows();
    if (d == 0) return {0.0, Eigen::MatrixXd(0, 0)};
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) + mu * w.cwiseProduct(w);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(d, d);  // m^(d-1)
    for (Eigen::Index k = 1; k < d; ++k) power = power * m;
    AcyclicityValue out;
    out.value = (power * m).trace() - static_cast<double>(d);
    out.gradient = 2.0 * mu * static_cast<double>(d) * power.transpose().cwiseProduct(w);
    return out;
}

Adjacency threshold_and_repair(const Eigen::MatrixXd& w, double threshold) {
    require_square(w);
    if (!(threshold >= 0.0)) fail(ErrorKind::range, "threshold must be nonnegative");
    const auto n = static_cast<std::size_t>(w.rows());
    Adjacency g = Adjacency::square(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            if (r != c && w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) != 0.0 &&
                std::abs(w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) >= threshold)
                g.set(r, c);
    while (!is_acyclic(g)) {
        // Reachability closure; an edge u->v lies on a cycle iff v reaches u.
        std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) reach[r][c] = g(r, c);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t r = 0; r < n; ++r)
                if (reach[r][k])
                    for (std::size_t c = 0; c < n; ++c)
                        if (reach[k][c]) reach[r][c] = true;
        double best = std::numeric_limits<double>::infinity();
        std::size_t br = 0, bc = 0;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                if (!g(r, c) || !reach[c][r]) continue;
                const double mag = std::abs(w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
                if (mag < best) {
                    best = mag;
                    br = r;
                    bc = c;
                }
            }
        g.set(br, bc, false);
    }
    return g;
}

}  // namespace dbn
