#include "smi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace smi {

void Dataset::validate(bool allow_nan) const {
    if (values.rows() < 1 || values.cols() < 1)
        throw std::invalid_argument("dataset must have at least one row and column");
    if (static_cast<Eigen::Index>(column_names.size()) != values.cols())
        throw std::invalid_argument("column name count does not match width");
    if (!allow_nan && !values.allFinite())
        throw std::invalid_argument("dataset contains non-finite entries");
}

Eigen::Index Dataset::column(const std::string& name) const {
    for (std::size_t j = 0; j < column_names.size(); ++j)
        if (column_names[j] == name) return static_cast<Eigen::Index>(j);
    throw std::invalid_argument("no column named '" + name + "'");
}

void ImputationSet::validate() const {
    if (datasets.size() < 2) throw std::invalid_argument("need m >= 2 imputed datasets");
    const auto& first = datasets.front();
    for (const auto& d : datasets) {
        d.validate();
        if (d.n() != first.n() || d.p() != first.p() || d.column_names != first.column_names)
            throw std::invalid_argument("imputed datasets must share shape and header");
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        out.push_back(cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& s, bool allow_nan, std::size_t row, std::size_t col) {
    if (s.empty() || s == "NA" || s == "na" || s == "nan" || s == "NaN") {
        if (allow_nan) return std::numeric_limits<double>::quiet_NaN();
        throw DataError("missing cell at row " + std::to_string(row) + ", column " +
                        std::to_string(col));
    }
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("cannot parse numeric cell '" + s + "' at row " + std::to_string(row) +
                        ", column " + std::to_string(col));
    }
}

}  // namespace

Dataset read_csv(std::istream& in, bool allow_nan) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV input");
    Dataset ds;
    ds.column_names = split_line(line);
    if (ds.column_names.empty()) throw DataError("CSV header has no columns");
    std::vector<std::vector<double>> rows;
    std::size_t rowno = 1;
    while (std::getline(in, line)) {
        ++rowno;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != ds.column_names.size())
            throw DataError("row " + std::to_string(rowno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(ds.column_names.size()));
        std::vector<double> vals(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j)
            vals[j] = parse_cell(cells[j], allow_nan, rowno, j + 1);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw DataError("CSV has a header but no data rows");
    ds.values.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(ds.column_names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    ds.validate(allow_nan);
    return ds;
}

Dataset read_csv_file(const std::string& path, bool allow_nan) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return read_csv(in, allow_nan);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_csv(const Dataset& ds, std::ostream& out) {
    for (std::size_t j = 0; j < ds.column_names.size(); ++j) {
        if (j) out << ',';
        out << ds.column_names[j];
    }
    out << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < ds.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.values.cols(); ++j) {
            if (j) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", ds.values(i, j));
            out << buf;
        }
        out << '\n';
    }
}

void write_csv_file(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_csv(ds, out);
}

ImputationSet load_imputation_set(const std::string& path) {
    namespace fs = std::filesystem;
    ImputationSet imps;
    if (fs::is_directory(path)) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("imp_", 0) == 0 && entry.path().extension() == ".csv")
                files.push_back(entry.path().string());
        }
        if (files.size() < 2)
            throw DataError("directory '" + path + "' holds " + std::to_string(files.size()) +
                            " imp_*.csv files, need at least 2");
        std::sort(files.begin(), files.end());
        for (const auto& f : files) imps.datasets.push_back(read_csv_file(f));
    } else {
        Dataset all = read_csv_file(path);
        Eigen::Index impcol;
        try {
            impcol = all.column("imp");
        } catch (const std::exception&) {
            impcol = all.column(".imp");
        }
        std::map<int, std::vector<Eigen::Index>> groups;
        for (Eigen::Index i = 0; i < all.n(); ++i) {
            const double v = all.values(i, impcol);
            const int idx = static_cast<int>(std::lround(v));
            if (std::abs(v - idx) > 1e-9 || idx < 1)
                throw DataError("imputation index column must hold integers >= 1");
            groups[idx].push_back(i);
        }
        const int m = static_cast<int>(groups.size());
        std::vector<std::string> names;
        for (std::size_t j = 0; j < all.column_names.size(); ++j)
            if (static_cast<Eigen::Index>(j) != impcol) names.push_back(all.column_names[j]);
        int expect = 1;
        for (const auto& [idx, rows] : groups) {
            if (idx != expect++)
                throw DataError("imputation indices must be contiguous 1..m");
            Dataset d;
            d.column_names = names;
            d.values.resize(static_cast<Eigen::Index>(rows.size()), all.p() - 1);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                Eigen::Index jj = 0;
                for (Eigen::Index j = 0; j < all.p(); ++j)
                    if (j != impcol) d.values(static_cast<Eigen::Index>(i), jj++) = all.values(rows[i], j);
            }
            imps.datasets.push_back(std::move(d));
        }
        (void)m;
    }
    try {
        imps.validate();
    } catch (const std::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return imps;
}

}  // namespace smi
