#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace smi {

// A completed (no missing cells) numeric dataset.
struct Dataset {
    Eigen::MatrixXd values;
    std::vector<std::string> column_names;

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index p() const { return values.cols(); }

    // throws std::invalid_argument on empty shape, non-finite cells, or a
    // header/width mismatch
    void validate(bool allow_nan = false) const;

    // index of a named column, throws if absent
    Eigen::Index column(const std::string& name) const;
};

// The m completed datasets produced by multiple imputation.
struct ImputationSet {
    std::vector<Dataset> datasets;

    int m() const { return static_cast<int>(datasets.size()); }
    Eigen::Index n() const { return datasets.empty() ? 0 : datasets.front().n(); }
    Eigen::Index p() const { return datasets.empty() ? 0 : datasets.front().p(); }
    const std::vector<std::string>& column_names() const { return datasets.front().column_names; }

    void validate() const;  // m >= 2, shared shape and header
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CSV: header row of column names, numeric cells. "nan"/"NA"/empty parse to
// NaN when allow_nan is set (incomplete inputs for the imputation harness).
Dataset read_csv(std::istream& in, bool allow_nan = false);
Dataset read_csv_file(const std::string& path, bool allow_nan = false);
void write_csv(const Dataset& ds, std::ostream& out);  // 17 significant digits
void write_csv_file(const Dataset& ds, const std::string& path);

// Either a directory of imp_*.csv files (lexicographic order) or one CSV with
// an integer ".imp" column in 1..m.
ImputationSet load_imputation_set(const std::string& path);

}  // namespace smi
