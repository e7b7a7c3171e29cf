#ifndef QTMTBA_CSV_HPP
#define QTMTBA_CSV_HPP

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace qtmtba {

inline std::string csv_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}
inline std::string csv_number(long long x) { return std::to_string(x); }
inline std::string csv_number(int x) { return std::to_string(x); }

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    void add_row(std::vector<std::string> row) {
        if (row.size() != columns_.size())
            throw domain_error("csv: row has " + std::to_string(row.size()) + " fields, header has " +
                               std::to_string(columns_.size()));
        rows_.push_back(std::move(row));
    }

    void write(std::ostream& os) const {
        os << "#schema=1\n";
        write_line(os, columns_);
        for (const auto& r : rows_) write_line(os, r);
    }

private:
    static void write_line(std::ostream& os, const std::vector<std::string>& f) {
        for (size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i];
        os << '\n';
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::vector<std::string> free_energy_columns(bool with_temperature = false) {
    std::vector<std::string> c{"beta"};
    if (with_temperature) c.push_back("T_over_J");
    for (const char* s : {"J", "p0_num", "p0_den", "f", "minus_beta_f", "iterations", "residual"}) c.emplace_back(s);
    return c;
}

inline std::vector<std::string> correlation_columns(int p0, bool with_temperature = false) {
    std::vector<std::string> c{"beta"};
    if (with_temperature) c.push_back("T_over_J");
    for (const char* s : {"J", "p0", "k", "xi_k", "xi_k_over_beta"}) c.emplace_back(s);
    for (int j = 1; j <= p0 - 2; ++j) c.push_back("zeta_" + std::to_string(j));
    c.emplace_back("iterations");
    c.emplace_back("residual");
    return c;
}

inline std::vector<std::string> free_fermion_columns() {
    return {"beta", "J", "p0_num", "p0_den", "f", "minus_beta_f", "inv_xi2", "inv_xi2_printed", "inv_xi3",
            "iterations", "residual"};
}

inline std::vector<std::string> zero_map_columns() { return {"k", "n", "re_v", "im_v", "multiplicity"}; }

inline std::vector<std::string> check_columns() { return {"check", "max_residual", "tolerance", "pass"}; }

}  // namespace qtmtba

#endif
