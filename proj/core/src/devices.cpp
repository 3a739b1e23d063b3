#include "smi/devices.hpp"

#include <cmath>
#include <stdexcept>

namespace smi {

// ----- linear regression -----

LinRegDevice::LinRegDevice(LinRegKind kind, std::string response_column, int n_covariates)
    : kind_(kind), response_(std::move(response_column)), k_(n_covariates) {
    if (k_ < 1) throw std::invalid_argument("LinRegDevice: need at least one covariate");
}

std::string LinRegDevice::name() const {
    switch (kind_) {
        case LinRegKind::Wald: return "linreg-wald";
        case LinRegKind::Lrt: return "linreg-lrt";
        case LinRegKind::RaoScore: return "linreg-rs";
    }
    return "linreg";
}

double LinRegDevice::evaluate(const Dataset& ds) const {
    ds.validate();
    const Eigen::Index ycol = ds.column(response_);
    const Eigen::Index n = ds.n();
    const Eigen::Index p = ds.p() - 1;
    if (p != k_)
        throw DeviceError("dataset has " + std::to_string(p) + " covariates, device declares k=" +
                          std::to_string(k_));
    if (n <= p + 1) throw DeviceError("need n > p + 1 rows for the regression devices");

    Eigen::VectorXd y(n);
    Eigen::MatrixXd X(n, p);
    Eigen::Index jj = 0;
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
        if (j == ycol) continue;
        X.col(jj++) = ds.values.col(j);
    }
    y = ds.values.col(ycol);

    // centering absorbs the intercept in both the null and the full model
    y.array() -= y.mean();
    X.rowwise() -= X.colwise().mean();

    const double sse0 = y.squaredNorm();
    if (sse0 <= 0.0) return 0.0;  // constant response: all three statistics vanish

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p) throw DeviceError("rank-deficient covariate matrix");
    const Eigen::VectorXd beta = qr.solve(y);
    const double quad = y.dot(X * beta);  // y' X (X'X)^{-1} X' y
    const double nd = static_cast<double>(n);
    const double sigma0_sq = sse0 / nd;
    const double sigma_sq = (sse0 - quad) / nd;

    switch (kind_) {
        case LinRegKind::Wald:
            if (sigma_sq <= 0.0) throw DeviceError("perfect fit: residual variance is zero");
            return quad / sigma_sq;
        case LinRegKind::Lrt:
            if (sigma_sq <= 0.0) throw DeviceError("perfect fit: residual variance is zero");
            return nd * std::log(sigma0_sq / sigma_sq);
        case LinRegKind::RaoScore:
            return quad / sigma0_sq;
    }
    throw DeviceError("unreachable");
}

// ----- multivariate normal covariance LRT -----

MvnCovLrtDevice::MvnCovLrtDevice(Eigen::MatrixXd sigma0) : sigma0_(std::move(sigma0)) {
    if (sigma0_.rows() != sigma0_.cols() || sigma0_.rows() < 1)
        throw std::invalid_argument("Sigma0 must be square");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma0_);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("Sigma0 must be positive definite");
    const int p = static_cast<int>(sigma0_.rows());
    k_ = p * (p + 1) / 2;
}

double MvnCovLrtDevice::evaluate(const Dataset& ds) const {
    ds.validate();
    const Eigen::Index n = ds.n();
    const Eigen::Index p = ds.p();
    if (p != sigma0_.rows()) throw DeviceError("dataset width does not match Sigma0");
    if (n <= p) throw DeviceError("need n > p rows for the covariance device");
    Eigen::MatrixXd X = ds.values;
    X.rowwise() -= X.colwise().mean();
    const Eigen::MatrixXd S = (X.transpose() * X) / static_cast<double>(n);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw DeviceError("sample covariance is singular");
    const Eigen::MatrixXd W = sigma0_.llt().solve(S);  // Sigma0^{-1} S
    const double tr = W.trace();
    const double logdet = std::log(W.determinant());
    if (!std::isfinite(logdet)) throw DeviceError("singular covariance ratio");
    return static_cast<double>(n) * (tr - logdet - static_cast<double>(p));
}

// ----- conditional independence on a 2x2x2 count table -----

ContingencyCiLrtDevice::ContingencyCiLrtDevice(std::string factor_a, std::string factor_b,
                                               std::string stratum, std::string count)
    : a_(std::move(factor_a)), b_(std::move(factor_b)), s_(std::move(stratum)),
      c_(std::move(count)) {}

double ContingencyCiLrtDevice::evaluate(const Dataset& ds) const {
    ds.validate();
    const Eigen::Index ca = ds.column(a_), cb = ds.column(b_), cs = ds.column(s_),
                       cc = ds.column(c_);
    double cnt[2][2][2] = {};
    auto level = [](double v, const std::string& what) {
        const long r = std::lround(v);
        if ((r != 0 && r != 1) || std::abs(v - static_cast<double>(r)) > 1e-9)
            throw DeviceError(what + " level must be 0 or 1");
        return static_cast<int>(r);
    };
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const int a = level(ds.values(i, ca), a_);
        const int b = level(ds.values(i, cb), b_);
        const int s = level(ds.values(i, cs), s_);
        const double w = ds.values(i, cc);
        if (w < 0.0) throw DeviceError("negative count");
        cnt[a][b][s] += w;
    }
    double g2 = 0.0;
    for (int s = 0; s < 2; ++s) {
        double ns = 0.0, ra[2] = {}, rb[2] = {};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                ns += cnt[a][b][s];
                ra[a] += cnt[a][b][s];
                rb[b] += cnt[a][b][s];
            }
        if (ns <= 0.0) throw DeviceError("empty stratum in the count table");
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const double obs = cnt[a][b][s];
                if (obs <= 0.0) continue;
                const double exp = ra[a] * rb[b] / ns;
                if (exp <= 0.0) throw DeviceError("zero marginal with a positive cell");
                g2 += 2.0 * obs * std::log(obs / exp);
            }
    }
    return std::max(0.0, g2);
}

// ----- two-group Bernoulli LRT -----

BernoulliTwoGroupLrtDevice::BernoulliTwoGroupLrtDevice(double theta00, double theta01,
                                                       std::string x_column, std::string y_column)
    : theta00_(theta00), theta01_(theta01), xcol_(std::move(x_column)), ycol_(std::move(y_column)) {
    if (!(theta00_ > 0.0 && theta00_ < 1.0 && theta01_ > 0.0 && theta01_ < 1.0))
        throw std::invalid_argument("null success probabilities must lie in (0, 1)");
}

double BernoulliTwoGroupLrtDevice::evaluate(const Dataset& ds) const {
    ds.validate();
    const Eigen::Index cx = ds.column(xcol_), cy = ds.column(ycol_);
    double n[2] = {}, s[2] = {};
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const double xv = ds.values(i, cx), yv = ds.values(i, cy);
        const long x = std::lround(xv), y = std::lround(yv);
        if ((x != 0 && x != 1) || std::abs(xv - static_cast<double>(x)) > 1e-9)
            throw DeviceError("x level must be 0 or 1");
        if ((y != 0 && y != 1) || std::abs(yv - static_cast<double>(y)) > 1e-9)
            throw DeviceError("y level must be 0 or 1");
        n[x] += 1.0;
        s[x] += static_cast<double>(y);
    }
    if (n[0] == 0.0 || n[1] == 0.0) throw DeviceError("both x groups must be present");
    auto loglik = [&](double th0, double th1) {
        const double th[2] = {th0, th1};
        double ll = 0.0;
        for (int g = 0; g < 2; ++g) {
            if (s[g] > 0.0) ll += s[g] * std::log(th[g]);
            if (n[g] - s[g] > 0.0) ll += (n[g] - s[g]) * std::log(1.0 - th[g]);
        }
        return ll;
    };
    const double ll_hat = loglik(s[0] / n[0], s[1] / n[1]);
    const double ll_null = loglik(theta00_, theta01_);
    return std::max(0.0, 2.0 * (ll_hat - ll_null));
}

}  // namespace smi
