#pragma once

#include "bp/dsl.hpp"
#include "bp/kb.hpp"

#include <string>

namespace bp::test {

inline std::string model_path(const std::string& name) {
    return std::string(BP_MODELS_DIR) + "/" + name;
}

inline std::string data_path(const std::string& name) {
    return std::string(BP_TEST_DATA_DIR) + "/" + name;
}

inline const ModelFile& coffee() {
    static const ModelFile m = load_model(model_path("coffee.bp"));
    return m;
}

inline Rational q(long n, long d = 1) {
    Rational r(n, d);
    r.canonicalize();
    return r;
}

/// Valuation over the coffee model's fluents (h, Final, Fail).
inline World hw(long h) {
    return World{q(h), q(0), q(0)};
}

}  // namespace bp::test
