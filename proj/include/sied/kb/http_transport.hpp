#pragma once

#include <httplib.h>

#include "sied/kb/remote.hpp"

namespace sied::kb {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, int timeout_ms) : client_(base_url) {
    const auto sec = timeout_ms / 1000;
    const auto usec = (timeout_ms % 1000) * 1000;
    client_.set_connection_timeout(sec, usec);
    client_.set_read_timeout(sec, usec);
    client_.set_write_timeout(sec, usec);
  }

  HttpResponse post(const std::string& path, const std::string& body, const std::string& content_type) override {
    auto res = client_.Post(path, body, content_type);
    if (!res) throw BackendUnavailable("directions service unreachable: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  httplib::Client client_;
};

}  // namespace sied::kb
