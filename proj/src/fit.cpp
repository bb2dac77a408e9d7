#include "starts/fit.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "starts/errors.hpp"

namespace starts {

std::string_view method_name(Method m) {
    switch (m) {
        case Method::ML: return "ML";
        case Method::CML: return "CML";
        case Method::ULS: return "ULS";
        case Method::TSMDFA: return "TS-MDFA";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    std::string key;
    for (char c : name) {
        if (c == '-' || c == '_') continue;
        key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (key == "ML") return Method::ML;
    if (key == "CML") return Method::CML;
    if (key == "ULS") return Method::ULS;
    if (key == "TSMDFA" || key == "MDFA") return Method::TSMDFA;
    throw ConfigError("unknown method '" + std::string(name) + "' (expected ML, CML, ULS or TS-MDFA)");
}

std::string_view convergence_name(Convergence c) {
    switch (c) {
        case Convergence::ParamTolerance: return "param-tolerance";
        case Convergence::PatienceStop: return "patience-stop";
        case Convergence::MaxIters: return "max-iters";
    }
    return "?";
}

void FitOptions::validate() const {
    if (n_starts < 1) throw ConfigError("n_starts must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (!(param_tol > 0.0)) throw ConfigError("param_tol must be > 0");
    if (inner.max_evaluations < 1 || outer.max_evaluations < 1) {
        throw ConfigError("optimizer budgets must be >= 1");
    }
    if (!(inner.scan_step >= 0.0) || !(outer.xtol > 0.0)) throw ConfigError("optimizer tolerances must be > 0");
}

}  // namespace starts
