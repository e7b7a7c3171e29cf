#ifndef QTMTBA_CHECK_REPORT_HPP
#define QTMTBA_CHECK_REPORT_HPP

#include <algorithm>
#include <complex>
#include <cstdio>
#include <string>
#include <vector>

namespace qtmtba {

struct CheckEntry {
    std::string name;
    std::vector<std::complex<double>> samples;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    bool soft = false;  // soft entries are reported but never fail the report
    std::string note;
};

class CheckReport {
public:
    std::vector<CheckEntry> entries;

    void add(CheckEntry e) {
        e.pass = e.max_residual < e.tolerance;
        entries.push_back(std::move(e));
    }

    // for checks whose outcome is not a residual-vs-tolerance comparison
    void add_flag(std::string name, bool ok, std::string note = {}, bool soft = false) {
        CheckEntry e;
        e.name = std::move(name);
        e.pass = ok;
        e.soft = soft;
        e.max_residual = ok ? 0.0 : 1.0;
        e.tolerance = 0.5;
        e.note = std::move(note);
        entries.push_back(std::move(e));
    }

    void merge(const CheckReport& other, const std::string& prefix = {}) {
        for (auto e : other.entries) {
            if (!prefix.empty()) e.name = prefix + e.name;
            entries.push_back(std::move(e));
        }
    }

    bool all_pass() const {
        return std::all_of(entries.begin(), entries.end(),
                           [](const CheckEntry& e) { return e.pass || e.soft; });
    }

    double worst_residual() const {
        double w = 0.0;
        for (const auto& e : entries) w = std::max(w, e.max_residual);
        return w;
    }

    const CheckEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }

    std::vector<std::string> failures() const {
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (!e.pass && !e.soft) out.push_back(e.name);
        return out;
    }

    std::string summary() const {
        std::string s;
        char buf[256];
        for (const auto& e : entries) {
            std::snprintf(buf, sizeof buf, "%-44s %s  max_res=%.3e tol=%.1e%s%s\n", e.name.c_str(),
                          e.pass ? "pass" : (e.soft ? "SOFT-FAIL" : "FAIL"), e.max_residual,
                          e.tolerance, e.note.empty() ? "" : "  ", e.note.c_str());
            s += buf;
        }
        return s;
    }
};

}  // namespace qtmtba

#endif
