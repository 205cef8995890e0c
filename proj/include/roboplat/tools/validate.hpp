#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "roboplat/dataset/session.hpp"

namespace roboplat::tools {

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity;
    std::string code;
    std::filesystem::path file;
    std::size_t line{0};
    std::string message;
};

struct ValidationReport {
    std::vector<Diagnostic> diagnostics;

    std::size_t error_count() const;
    std::size_t warning_count() const;
};

/// Checks header presence, monotone timestamps, per-file arity consistency,
/// camera image existence and ADC readings against calibration/device.txt.
ValidationReport validate(const dataset::LoadedSession& session);

std::string format_diagnostic(const Diagnostic& d);

}  // namespace roboplat::tools
