#pragma once

#include <string>

#include "statescope/error.hpp"
#include "statescope/store.hpp"

namespace httplib {
class Server;
}

namespace statescope::server {

/// Registers every session endpoint on `http`. The store must outlive it.
void install_routes(httplib::Server& http, store::SessionStore& store);

/// HTTP status for an error code: 404 for missing sessions or artifacts,
/// 409 for duplicates, 400 for unparsable bodies, 422 for other validation
/// failures and 500 for I/O.
int status_for(const Error& error);

/// Blocks serving on host:port.
int serve(store::SessionStore& store, const std::string& host, int port);

}  // namespace statescope::server
