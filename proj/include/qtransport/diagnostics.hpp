// diagnostics.hpp: regime warnings raised by the numerical and closed-form paths.
#pragma once

#include <string>
#include <vector>

namespace qtransport {

// Records a warning and echoes it to stderr unless echo is disabled.
void warn(const std::string& message);

// Warnings raised since the last call, oldest first; clears the log.
std::vector<std::string> drain_warnings();

void set_warning_echo(bool enabled);

// While alive, warnings raised on the constructing thread are collected here
// instead of the global log.
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }

private:
    std::vector<std::string> messages_;
    std::vector<std::string>* previous_;
};

}  // namespace qtransport
