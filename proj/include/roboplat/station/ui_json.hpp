#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "roboplat/commbench/bench.hpp"
#include "roboplat/protocol/messages.hpp"

namespace roboplat::station {

/// Key order is part of the wire contract, so objects keep insertion order.
using Json = nlohmann::ordered_json;

class UiError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct UiCommand {
    protocol::Message command;  // CmdDigital or CmdPwm
};
struct UiLatencyTest {
    std::size_t probes{100};
};
struct UiStatusQuery {};

using UiRequest = std::variant<UiCommand, UiLatencyTest, UiStatusQuery>;

/// Parses one inbound line. Throws UiError with a human readable reason.
///   {"type":"digital","line":0,"value":1}
///   {"type":"pwm","values":[500,500,500,500]}
///   {"type":"latency_test"} or {"type":"latency_test","probes":50}
///   {"type":"status"}
UiRequest parse_ui_request(std::string_view line);

/// Outbound lines, each without the trailing newline.
std::string status_json(bool connected, bool verified);
std::string telemetry_json(const protocol::Telemetry& t);
std::string bench_result_json(const commbench::LatencyResult& r);
std::string ack_json(std::string_view type);
std::string error_json(std::string_view reason);

/// Gateway form of a command, as the UI would send it.
std::string command_json(const protocol::Message& cmd);

}  // namespace roboplat::station
