#include "roboplat/station/ui_json.hpp"

namespace roboplat::station {

using namespace protocol;

namespace {

constexpr std::size_t kMaxProbes = 10000;

std::int64_t int_field(const Json& j, const char* key) {
    if (!j.contains(key)) throw UiError(std::string("missing field '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw UiError(std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
}

}  // namespace

UiRequest parse_ui_request(std::string_view line) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        throw UiError("malformed JSON");
    }
    if (!j.is_object()) throw UiError("expected a JSON object");
    if (!j.contains("type") || !j.at("type").is_string()) throw UiError("missing field 'type'");
    const auto type = j.at("type").get<std::string>();

    if (type == "digital") {
        const auto ln = int_field(j, "line");
        const auto value = int_field(j, "value");
        if (ln < 0 || ln > 255) throw UiError("line out of range");
        if (value != 0 && value != 1) throw UiError("value must be 0 or 1");
        return UiCommand{CmdDigital{static_cast<std::uint8_t>(ln), static_cast<std::uint8_t>(value)}};
    }
    if (type == "pwm") {
        if (!j.contains("values") || !j.at("values").is_array() || j.at("values").size() != 4)
            throw UiError("'values' must be an array of 4 integers");
        CmdPwm cmd;
        for (std::size_t i = 0; i < 4; ++i) {
            const auto& v = j.at("values")[i];
            if (!v.is_number_integer()) throw UiError("'values' must be an array of 4 integers");
            const auto x = v.get<std::int64_t>();
            // Above 1000 still fits the wire format; submit_command rejects it.
            if (x < 0 || x > 65535) throw UiError("pwm value out of range");
            cmd.strengths[i] = static_cast<std::uint16_t>(x);
        }
        return UiCommand{cmd};
    }
    if (type == "latency_test") {
        UiLatencyTest t;
        if (j.contains("probes")) {
            const auto n = int_field(j, "probes");
            if (n < 1 || n > static_cast<std::int64_t>(kMaxProbes)) throw UiError("probes out of range");
            t.probes = static_cast<std::size_t>(n);
        }
        return t;
    }
    if (type == "status") return UiStatusQuery{};
    throw UiError("unknown type '" + type + "'");
}

std::string status_json(bool connected, bool verified) {
    Json j;
    j["type"] = "status";
    j["connected"] = connected;
    j["verified"] = verified;
    return j.dump();
}

std::string telemetry_json(const Telemetry& t) {
    Json j;
    j["type"] = "telemetry";
    j["t_ns"] = t.t_ns;
    j["car_pos_m"] = t.car_pos_m;
    j["pwm"] = Json::array({t.pwm[0], t.pwm[1], t.pwm[2], t.pwm[3]});
    auto adc = Json::array();
    for (const auto& r : t.adc) {
        Json a;
        a["ch"] = r.channel;
        a["v"] = r.reading;
        adc.push_back(std::move(a));
    }
    j["adc"] = std::move(adc);
    j["attitude"] = Json::array({t.roll_rad, t.pitch_rad});
    return j.dump();
}

std::string bench_result_json(const commbench::LatencyResult& r) {
    Json j;
    j["type"] = "bench_result";
    j["quantity"] = "latency_ms";
    j["mean_ms"] = r.mean_ms;
    j["std_ms"] = r.std_ms;
    j["sent"] = r.sent;
    j["received"] = r.received;
    j["timeouts"] = r.timeouts;
    j["aborted"] = r.aborted;
    return j.dump();
}

std::string ack_json(std::string_view type) {
    Json j;
    j["type"] = "ack";
    j["command"] = std::string(type);
    return j.dump();
}

std::string error_json(std::string_view reason) {
    Json j;
    j["type"] = "error";
    j["reason"] = std::string(reason);
    return j.dump();
}

std::string command_json(const Message& cmd) {
    Json j;
    if (const auto* d = std::get_if<CmdDigital>(&cmd)) {
        j["type"] = "digital";
        j["line"] = d->line;
        j["value"] = d->value;
    } else if (const auto* p = std::get_if<CmdPwm>(&cmd)) {
        j["type"] = "pwm";
        j["values"] = Json::array({p->strengths[0], p->strengths[1], p->strengths[2], p->strengths[3]});
    } else {
        throw std::invalid_argument("not a command");
    }
    return j.dump();
}

}  // namespace roboplat::station
