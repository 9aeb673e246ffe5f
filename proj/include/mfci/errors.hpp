#pragma once
#include <stdexcept>
#include <string>

namespace mfci {

// Base of everything thrown by the library. The CLI maps these to exit codes:
// config family -> 2, numerical family -> 3, missing_input -> 4.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : error {
    using error::error;
};
struct dimension_error : config_error {
    using config_error::config_error;
};
struct domain_error : config_error {
    using config_error::config_error;
};
struct geometry_error : config_error {
    using config_error::config_error;
};
struct insufficient_data_error : config_error {
    using config_error::config_error;
};

struct missing_input_error : error {
    using error::error;
};

struct numerical_error : error {
    using error::error;
};
struct nonconvergence_error : numerical_error {
    double residual;
    nonconvergence_error(const std::string& what, double res)
        : numerical_error(what), residual(res) {}
};
struct ill_conditioned_error : numerical_error {
    int index;  // offending basis function (1-based m)
    ill_conditioned_error(const std::string& what, int m)
        : numerical_error(what), index(m) {}
};
struct degenerate_field_error : numerical_error {
    int ix, iy;
    double k;
    degenerate_field_error(const std::string& what, int ix_, int iy_, double k_)
        : numerical_error(what), ix(ix_), iy(iy_), k(k_) {}
};
struct initialization_error : numerical_error {
    double residual;
    initialization_error(const std::string& what, double res)
        : numerical_error(what), residual(res) {}
};
struct divergence_error : numerical_error {
    using numerical_error::numerical_error;
};

}  // namespace mfci
