#include <charconv>

#include "roboplat/transport/net.hpp"

namespace roboplat::transport {

Endpoint Endpoint::tcp(std::string host, std::uint16_t port) {
    Endpoint e;
    e.kind = Kind::Tcp;
    e.host = std::move(host);
    e.port = port;
    return e;
}

Endpoint Endpoint::pipe(std::string label) {
    Endpoint e;
    e.kind = Kind::Pipe;
    e.label = std::move(label);
    return e;
}

Endpoint Endpoint::parse(std::string_view text) {
    const auto bad = [&](const char* why) {
        return TransportError(TransportErrorCode::BadEndpoint, std::string(why) + ": '" + std::string(text) + "'");
    };
    if (text.starts_with("pipe:")) {
        const auto label = text.substr(5);
        if (label.empty()) throw bad("empty pipe label");
        return pipe(std::string(label));
    }
    std::string_view rest = text;
    if (rest.starts_with("tcp://")) rest.remove_prefix(6);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos) throw bad("missing port");
    const auto host = rest.substr(0, colon);
    const auto port_text = rest.substr(colon + 1);
    unsigned port = 0;
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port_text.empty())
        throw bad("port is not a number");
    if (port < 1 || port > 65535) throw bad("port out of range");
    return tcp(std::string(host), static_cast<std::uint16_t>(port));
}

std::string Endpoint::to_string() const {
    if (kind == Kind::Pipe) return "pipe:" + label;
    return (host.empty() ? std::string("0.0.0.0") : host) + ":" + std::to_string(port);
}

}  // namespace roboplat::transport
