#pragma once

// Structured result of a verification check: pass/fail plus whatever was
// measured (error, confidence interval, seed) and a list of located
// violations. Checks report, they do not throw.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scgrad {

struct CheckReport {
    std::string name;
    bool passed = true;
    std::optional<double> measured;
    std::optional<double> tolerance;
    std::optional<std::pair<double, double>> ci;
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> violations;  // (location, message)

    explicit CheckReport(std::string check_name = {}) : name(std::move(check_name)) {}

    void fail(const std::string& location, const std::string& message) {
        passed = false;
        violations.emplace_back(location, message);
    }

    // Annotation that does not flip the verdict (e.g. "skipped: ...").
    void note(const std::string& location, const std::string& message) {
        violations.emplace_back(location, message);
    }

    std::string summary() const {
        std::string s = name + ": " + (passed ? "pass" : "FAIL");
        for (const auto& [loc, msg] : violations) {
            s += "\n  [" + loc + "] " + msg;
        }
        return s;
    }
};

}  // namespace scgrad
