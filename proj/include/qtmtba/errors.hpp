#ifndef QTMTBA_ERRORS_HPP
#define QTMTBA_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qtmtba {

// bad physical input or a request outside the supported parameter range
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

struct validation_error : std::runtime_error {
    std::string identity;
    validation_error(std::string id, const std::string& msg)
        : std::runtime_error(msg), identity(std::move(id)) {}
};

struct solver_error : std::runtime_error {
    double last_residual = 0.0;
    std::vector<double> history;
    solver_error(const std::string& msg, double last, std::vector<double> hist = {})
        : std::runtime_error(msg), last_residual(last), history(std::move(hist)) {}
};

struct singular_evaluation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// sign pattern of an excited-state function left its prescribed set
struct branch_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    std::string field;
    config_error(std::string f, const std::string& msg)
        : std::runtime_error(f.empty() ? msg : f + ": " + msg), field(std::move(f)) {}
};

}  // namespace qtmtba

#endif
