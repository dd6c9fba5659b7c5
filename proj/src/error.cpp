#include <ccm/error.hpp>

#include <iostream>
#include <mutex>

namespace ccm {

namespace {

std::mutex g_warning_mutex;
thread_local WarningCapture* t_capture = nullptr;

WarningHandler& handler_slot()
{
    static WarningHandler handler = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

} // namespace

WarningHandler set_warning_handler(WarningHandler handler)
{
    std::lock_guard lock(g_warning_mutex);
    auto previous = std::move(handler_slot());
    handler_slot() = std::move(handler);
    return previous;
}

WarningCapture::WarningCapture() : previous_(t_capture) { t_capture = this; }

WarningCapture::~WarningCapture() { t_capture = previous_; }

void warn(const std::string& message)
{
    if (t_capture) t_capture->messages_.push_back(message);
    std::lock_guard lock(g_warning_mutex);
    if (handler_slot()) handler_slot()(message);
}

} // namespace ccm
