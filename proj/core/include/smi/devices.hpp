#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "smi/device.hpp"

namespace smi {

enum class LinRegKind { Wald, Lrt, RaoScore };

// Tests H0: all slope coefficients are zero in a linear model with intercept.
// MLE (denominator n) variance estimates throughout. k = number of covariates.
class LinRegDevice final : public TestDevice {
public:
    LinRegDevice(LinRegKind kind, std::string response_column, int n_covariates);
    int k() const override { return k_; }
    double evaluate(const Dataset& ds) const override;
    std::string name() const override;

private:
    LinRegKind kind_;
    std::string response_;
    int k_;
};

// Likelihood-ratio test of H0: Cov = Sigma0 for centered multivariate normal
// data; k = p(p+1)/2.
class MvnCovLrtDevice final : public TestDevice {
public:
    explicit MvnCovLrtDevice(Eigen::MatrixXd sigma0);
    int k() const override { return k_; }
    double evaluate(const Dataset& ds) const override;
    std::string name() const override { return "mvn-cov-lrt"; }

private:
    Eigen::MatrixXd sigma0_;
    int k_;
};

// Likelihood-ratio test of conditional independence of two binary factors
// given a binary stratum, on a 2x2x2 count table given as rows
// (factor_a, factor_b, stratum, count) with 0/1 levels. Stacked inputs simply
// accumulate counts. k = 2.
class ContingencyCiLrtDevice final : public TestDevice {
public:
    ContingencyCiLrtDevice(std::string factor_a = "clinic", std::string factor_b = "care",
                           std::string stratum = "survival", std::string count = "count");
    int k() const override { return 2; }
    double evaluate(const Dataset& ds) const override;
    std::string name() const override { return "contingency-ci-lrt"; }

private:
    std::string a_, b_, s_, c_;
};

// Likelihood-ratio test of H0: (P(y=1|x=0), P(y=1|x=1)) = theta0 for binary
// x, y columns. k = 2.
class BernoulliTwoGroupLrtDevice final : public TestDevice {
public:
    BernoulliTwoGroupLrtDevice(double theta00, double theta01, std::string x_column = "x",
                               std::string y_column = "y");
    int k() const override { return 2; }
    double evaluate(const Dataset& ds) const override;
    std::string name() const override { return "bernoulli-two-group-lrt"; }

private:
    double theta00_, theta01_;
    std::string xcol_, ycol_;
};

// Runs a child process: CSV on stdin, one real number expected on stdout.
class ExternalDevice final : public TestDevice {
public:
    ExternalDevice(std::string command, int k, int timeout_ms = 60000);
    int k() const override { return k_; }
    double evaluate(const Dataset& ds) const override;
    std::string name() const override { return "external(" + command_ + ")"; }

private:
    std::string command_;
    int k_;
    int timeout_ms_;
};

}  // namespace smi
