#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

namespace pstudio::service {

struct Config {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "pstudio-data";
  std::size_t max_upload_bytes = 64u << 20;
  int min_side = 16;
  int max_side = 4096;

  /// Overrides from PSTUDIO_ADDR ("host:port"), PSTUDIO_DATA_DIR and
  /// PSTUDIO_MAX_UPLOAD_BYTES. Throws Error(InvalidArgument).
  void apply_env();
};

/// Splits "host:port" (port required). Throws Error(InvalidArgument).
std::pair<std::string, int> parse_addr(const std::string& addr);

/// HTTP API over a data directory:
///   POST   /images                      PNG body -> 201 {"session_id"}
///   GET    /images/{id}                 the uploaded PNG
///   GET    /images/{id}/palette         ?format=1d|1dplus|2d&k=&grid=&seed=
///   POST   /images/{id}/recolor         {"palette":..., "options":...} -> PNG
///   POST   /images/{id}/bookmarks       {"palette":..., "options":...} -> 201 bookmark
///   GET    /images/{id}/bookmarks       newest first
///   DELETE /bookmarks/{bid}
///   GET    /bookmarks/{bid}/image
/// Sessions and bookmarks are reloaded from the data directory on start.
class Service {
 public:
  explicit Service(Config config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds config.host:config.port (port 0 picks a free port) and returns
  /// the bound port. Throws Error(IoError) on failure.
  int bind();
  /// Serves until stop(); blocks.
  void listen();
  void stop();
  void wait_until_ready();

  const Config& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pstudio::service
