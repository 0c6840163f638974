#include "qtransport/diagnostics.hpp"

#include <iostream>
#include <mutex>

namespace qtransport {

namespace {
std::mutex g_mutex;
std::vector<std::string> g_log;
bool g_echo = true;
thread_local std::vector<std::string>* t_capture = nullptr;
}  // namespace

void warn(const std::string& message) {
    if (t_capture) {
        t_capture->push_back(message);
        return;
    }
    std::lock_guard lock(g_mutex);
    g_log.push_back(message);
    if (g_echo) std::cerr << "warning: " << message << '\n';
}

std::vector<std::string> drain_warnings() {
    std::lock_guard lock(g_mutex);
    std::vector<std::string> out;
    out.swap(g_log);
    return out;
}

void set_warning_echo(bool enabled) {
    std::lock_guard lock(g_mutex);
    g_echo = enabled;
}

WarningCapture::WarningCapture() : previous_(t_capture) { t_capture = &messages_; }

WarningCapture::~WarningCapture() { t_capture = previous_; }

}  // namespace qtransport
