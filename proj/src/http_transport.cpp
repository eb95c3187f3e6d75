#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "pmcts/errors.hpp"
#include "pmcts/model.hpp"

namespace pmcts {

HttpReply httplib_post(const std::string& url, const std::string& body,
                       const std::vector<std::pair<std::string, std::string>>& headers,
                       std::chrono::seconds timeout) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint must be an absolute http(s) URL: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers request_headers;
    for (const auto& [name, value] : headers) {
        request_headers.emplace(name, value);
    }
    const auto result = client.Post(path, request_headers, body, "application/json");
    if (!result) {
        return HttpReply{0, {}};
    }
    return HttpReply{result->status, result->body};
}

}  // namespace pmcts
