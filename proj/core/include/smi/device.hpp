#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

#include "smi/dataset.hpp"

namespace smi {

struct DeviceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A complete-data testing device: maps a dataset to a nonnegative test
// statistic for a k-dimensional null hypothesis. Must be deterministic and
// reentrant; stacked inputs (duplicated rows) are legal.
class TestDevice {
public:
    virtual ~TestDevice() = default;
    virtual int k() const = 0;
    virtual double evaluate(const Dataset& ds) const = 0;
    virtual std::string name() const { return "device"; }
};

// Convenience wrapper for fixtures and adapters.
class LambdaDevice final : public TestDevice {
public:
    LambdaDevice(int k, std::function<double(const Dataset&)> fn, std::string name = "lambda")
        : k_(k), fn_(std::move(fn)), name_(std::move(name)) {}
    int k() const override { return k_; }
    double evaluate(const Dataset& ds) const override { return fn_(ds); }
    std::string name() const override { return name_; }

private:
    int k_;
    std::function<double(const Dataset&)> fn_;
    std::string name_;
};

}  // namespace smi
