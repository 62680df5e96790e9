#include "pstudio/service.hpp"
#include "pstudio/error.hpp"
#include "pstudio/palette.hpp"
#include "pstudio/palette_json.hpp"
#include "pstudio/png_io.hpp"
#include "pstudio/recolor.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>

namespace pstudio::service {

using nlohmann::json;

std::pair<std::string, int> parse_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon + 1 == addr.size())
    throw Error(ErrorCode::InvalidArgument, "address '" + addr + "' is not host:port");
  std::string host = addr.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad port in '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range in '" + addr + "'");
  return {host, port};
}

void Config::apply_env() {
  if (const char* v = std::getenv("PSTUDIO_ADDR")) std::tie(host, port) = parse_addr(v);
  if (const char* v = std::getenv("PSTUDIO_DATA_DIR")) data_dir = v;
  if (const char* v = std::getenv("PSTUDIO_MAX_UPLOAD_BYTES")) {
    try {
      max_upload_bytes = std::stoull(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "PSTUDIO_MAX_UPLOAD_BYTES is not a number");
    }
  }
}

namespace {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string random_id() {
  static std::mutex mu;
  static std::random_device rd;
  static std::mt19937_64 gen(((std::uint64_t)rd() << 32) ^ rd());
  std::lock_guard lock(mu);
  std::ostringstream os;
  os << std::hex;
  for (int i = 0; i < 2; ++i) {
    const std::uint64_t v = gen();
    for (int b = 60; b >= 0; b -= 4) os << ((v >> b) & 15);
  }
  return os.str();
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::FormatMismatch:
    case ErrorCode::KMismatch:
    case ErrorCode::GridMismatch:
    case ErrorCode::ColorCountMismatch:
      return 409;
    case ErrorCode::InvalidK:
    case ErrorCode::InvalidCount:
    case ErrorCode::DegenerateCenters:
      return 422;
    case ErrorCode::IoError:
      return 500;
    default:
      return 400;
  }
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", code}, {"message", message}}.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send_error(res, status_for(e.code()), to_string(e.code()), e.what()); }

void send_json(httplib::Response& res, int status, const json& j) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

RecolorOptions parse_options(const json& j) {
  RecolorOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "options must be an object");
  try {
    if (j.contains("balance_eps")) o.balance_eps = j.at("balance_eps").get<double>();
    if (j.contains("balance_max_iter")) o.balance_max_iter = j.at("balance_max_iter").get<int>();
    if (j.contains("feather")) o.feather = j.at("feather").get<double>();
    if (j.contains("seed")) o.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("options: ") + e.what());
  }
  o.validate();
  return o;
}

json options_to_json(const RecolorOptions& o) {
  return {{"balance_eps", o.balance_eps}, {"balance_max_iter", o.balance_max_iter}, {"feather", o.feather}, {"seed", o.seed}};
}

struct RecolorRequest {
  AnyPalette palette;
  RecolorOptions options;
};

RecolorRequest parse_recolor_body(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "body must be a JSON object");
  if (j.contains("palette")) return {palette_from_json(j.at("palette")), parse_options(j.value("options", json()))};
  return {palette_from_json(j), RecolorOptions{}};
}

AnyPalette extract(PaletteFormat format, const Image& image, const ExtractionParams& params) {
  switch (format) {
    case PaletteFormat::Uniform1D: return extract_1d(image, params);
    case PaletteFormat::Proportional1D: return extract_1d_plus(image, params);
    case PaletteFormat::Spatial2D: return extract_2d(image, params);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown format");
}

ExtractionParams params_for(const AnyPalette& target, std::uint64_t seed) {
  ExtractionParams p;
  p.k = std::visit([](const auto& x) { return x.k; }, target);
  if (const auto* g = std::get_if<Palette2D>(&target)) p.grid = g->grid_size;
  p.seed = seed;
  return p;
}

// Width and height from the IHDR chunk, when the bytes look like a PNG.
std::optional<std::pair<std::uint32_t, std::uint32_t>> peek_png_size(const std::string& body) {
  static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (body.size() < 24 || std::memcmp(body.data(), sig, 8) != 0 || body.compare(12, 4, "IHDR") != 0) return std::nullopt;
  auto be32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(body[off + i]);
    return v;
  };
  return std::make_pair(be32(16), be32(20));
}

struct Session {
  std::string id;
  std::string image_sha;
  std::mutex mu;
  std::shared_ptr<const Image> image;
  std::map<std::string, std::pair<AnyPalette, std::string>> palettes;
};

struct Bookmark {
  std::string id;
  std::string session_id;
  std::string palette_text;  // canonical dump
  json options;
  std::string image_sha;
  std::string created_at;

  json to_json() const {
    return {{"id", id},
            {"session_id", session_id},
            {"palette", json::parse(palette_text)},
            {"options", options},
            {"image_sha256", image_sha},
            {"image_url", "/bookmarks/" + id + "/image"},
            {"created_at", created_at}};
  }
};

}  // namespace

struct Service::Impl {
  Config config;
  httplib::Server server;

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;

  std::mutex bookmarks_mu;
  std::vector<Bookmark> bookmarks;  // creation order

  std::mutex files_mu;

  explicit Impl(Config c) : config(std::move(c)) {
    std::filesystem::create_directories(images_dir());
    load();
    routes();
  }

  std::filesystem::path images_dir() const { return config.data_dir / "images"; }
  std::filesystem::path sessions_file() const { return config.data_dir / "sessions.jsonl"; }
  std::filesystem::path bookmarks_file() const { return config.data_dir / "bookmarks.jsonl"; }
  std::filesystem::path image_path(const std::string& sha) const { return images_dir() / (sha + ".png"); }

  void append_line(const std::filesystem::path& file, const json& j) {
    std::lock_guard lock(files_mu);
    std::ofstream out(file, std::ios::app | std::ios::binary);
    out << j.dump() << "\n";
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "cannot append to " + file.string());
  }

  std::string store_image(const std::vector<std::uint8_t>& png) {
    const std::string sha = sha256_hex(png);
    std::lock_guard lock(files_mu);
    const auto path = image_path(sha);
    if (!std::filesystem::exists(path)) {
      const auto tmp = path.string() + ".tmp-" + random_id();
      write_file(tmp, png);
      std::filesystem::rename(tmp, path);
    }
    return sha;
  }

  static std::vector<json> read_jsonl(const std::filesystem::path& file) {
    std::vector<json> out;
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        out.push_back(json::parse(line));
      } catch (const json::exception&) {
        // a torn final line from an interrupted write
      }
    }
    return out;
  }

  void load() {
    for (const json& j : read_jsonl(sessions_file())) {
      if (!j.contains("id") || !j.contains("image")) continue;
      auto s = std::make_shared<Session>();
      s->id = j["id"].get<std::string>();
      s->image_sha = j["image"].get<std::string>();
      if (std::filesystem::exists(image_path(s->image_sha))) sessions[s->id] = s;
    }
    for (const json& j : read_jsonl(bookmarks_file())) {
      const std::string op = j.value("op", "");
      if (op == "create") {
        bookmarks.push_back({j.at("id").get<std::string>(), j.at("session_id").get<std::string>(),
                             j.at("palette").get<std::string>(), j.at("options"), j.at("image").get<std::string>(),
                             j.value("created_at", "")});
      } else if (op == "delete") {
        const std::string id = j.value("id", "");
        std::erase_if(bookmarks, [&](const Bookmark& b) { return b.id == id; });
      }
    }
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  // Caller holds s.mu.
  std::shared_ptr<const Image> image_of(Session& s) {
    if (!s.image) s.image = std::make_shared<const Image>(read_png(image_path(s.image_sha)));
    return s.image;
  }

  // Caller holds s.mu.
  const std::pair<AnyPalette, std::string>& palette_of(Session& s, PaletteFormat format, const ExtractionParams& p) {
    const std::string key = std::string(format_name(format)) + "|" + std::to_string(p.k) + "|" +
                            std::to_string(p.grid) + "|" + std::to_string(p.seed);
    auto it = s.palettes.find(key);
    if (it == s.palettes.end()) {
      AnyPalette palette = extract(format, *image_of(s), p);
      std::string text = dump_palette(palette);
      it = s.palettes.emplace(key, std::make_pair(std::move(palette), std::move(text))).first;
    }
    return it->second;
  }

  RecolorResult run_recolor(Session& s, const RecolorRequest& req) {
    const PaletteFormat format = format_of(req.palette);
    const ExtractionParams params = params_for(req.palette, req.options.seed);
    params.validate(format);
    std::shared_ptr<const Image> image;
    AnyPalette source;
    {
      std::lock_guard lock(s.mu);
      image = image_of(s);
      source = palette_of(s, format, params).first;
    }
    return recolor(*image, source, req.palette, params, req.options);
  }

  void upload(const httplib::Request& req, httplib::Response& res) {
    if (req.body.size() > config.max_upload_bytes)
      return send_error(res, 413, "PayloadTooLarge", "upload exceeds " + std::to_string(config.max_upload_bytes) + " bytes");
    const auto max_side = static_cast<std::uint32_t>(config.max_side);
    if (const auto size = peek_png_size(req.body); size && (size->first > max_side || size->second > max_side))
      return send_error(res, 413, "PayloadTooLarge", "image exceeds maximum size " + std::to_string(config.max_side));
    Image image;
    try {
      image = decode_png({reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()});
    } catch (const Error& e) {
      return send_error(res, 400, "DecodeError", e.what());
    }
    if (image.width() < config.min_side || image.height() < config.min_side)
      return send_error(res, 400, "InvalidImage",
                        "below minimum size " + std::to_string(config.min_side) + "x" + std::to_string(config.min_side));
    if (image.width() > config.max_side || image.height() > config.max_side)
      return send_error(res, 413, "PayloadTooLarge", "image exceeds maximum size " + std::to_string(config.max_side));

    auto s = std::make_shared<Session>();
    s->id = random_id();
    s->image_sha = store_image(encode_png(image));
    s->image = std::make_shared<const Image>(std::move(image));
    append_line(sessions_file(), {{"id", s->id}, {"image", s->image_sha}});
    {
      std::lock_guard lock(sessions_mu);
      sessions[s->id] = s;
    }
    send_json(res, 201, {{"session_id", s->id}, {"width", s->image->width()}, {"height", s->image->height()}});
  }

  void get_palette(const httplib::Request& req, httplib::Response& res) {
    auto s = find_session(req.matches[1]);
    if (!s) return send_error(res, 404, "NotFound", "unknown session");
    if (!req.has_param("format")) return send_error(res, 400, "InvalidArgument", "missing format");
    const auto format = parse_format(req.get_param_value("format"));
    if (!format) return send_error(res, 400, "InvalidArgument", "format must be 1d, 1dplus or 2d");
    ExtractionParams params;
    try {
      if (req.has_param("k")) params.k = std::stoi(req.get_param_value("k"));
      if (req.has_param("grid")) params.grid = std::stoi(req.get_param_value("grid"));
      if (req.has_param("seed")) params.seed = std::stoull(req.get_param_value("seed"));
    } catch (const std::exception&) {
      return send_error(res, 400, "InvalidArgument", "k, grid and seed must be integers");
    }
    try {
      params.validate(*format);
      std::lock_guard lock(s->mu);
      res.status = 200;
      res.set_content(palette_of(*s, *format, params).second, "application/json");
    } catch (const Error& e) {
      send_error(res, e);
    }
  }

  void post_recolor(const httplib::Request& req, httplib::Response& res) {
    auto s = find_session(req.matches[1]);
    if (!s) return send_error(res, 404, "NotFound", "unknown session");
    try {
      const RecolorRequest r = parse_recolor_body(req.body);
      const RecolorResult result = run_recolor(*s, r);
      const auto png = encode_png(result.image);
      res.status = 200;
      res.set_content(std::string(png.begin(), png.end()), "image/png");
      if (result.balance) {
        std::ostringstream achieved;
        achieved.precision(17);
        for (std::size_t i = 0; i < result.balance->achieved.size(); ++i)
          achieved << (i ? "," : "") << result.balance->achieved[i];
        std::ostringstream residual;
        residual.precision(17);
        residual << result.balance->residual;
        res.set_header("X-Achieved-Proportions", achieved.str());
        res.set_header("X-Residual", residual.str());
        res.set_header("X-Balance-Iterations", std::to_string(result.balance->iterations));
        res.set_header("X-Balance-Repaired", result.balance->repaired ? "true" : "false");
      }
    } catch (const Error& e) {
      send_error(res, e);
    }
  }

  void post_bookmark(const httplib::Request& req, httplib::Response& res) {
    auto s = find_session(req.matches[1]);
    if (!s) return send_error(res, 404, "NotFound", "unknown session");
    try {
      const RecolorRequest r = parse_recolor_body(req.body);
      const std::string palette_text = dump_palette(r.palette);
      const json options = options_to_json(r.options);
      {
        std::lock_guard lock(bookmarks_mu);
        for (const Bookmark& b : bookmarks)
          if (b.session_id == s->id && b.palette_text == palette_text && b.options == options) {
            res.status = 409;
            res.set_content(json{{"error", "DuplicateBookmark"}, {"message", "identical bookmark exists"}, {"bookmark_id", b.id}}.dump(),
                            "application/json");
            return;
          }
      }
      const RecolorResult result = run_recolor(*s, r);
      const std::string sha = store_image(encode_png(result.image));
      Bookmark b{random_id(), s->id, palette_text, options, sha, now_iso8601()};
      std::lock_guard lock(bookmarks_mu);
      for (const Bookmark& other : bookmarks)
        if (other.session_id == s->id && other.palette_text == palette_text && other.options == options) {
          res.status = 409;
          res.set_content(json{{"error", "DuplicateBookmark"}, {"message", "identical bookmark exists"}, {"bookmark_id", other.id}}.dump(),
                          "application/json");
          return;
        }
      append_line(bookmarks_file(), {{"op", "create"},
                                     {"id", b.id},
                                     {"session_id", b.session_id},
                                     {"palette", b.palette_text},
                                     {"options", b.options},
                                     {"image", b.image_sha},
                                     {"created_at", b.created_at}});
      bookmarks.push_back(b);
      send_json(res, 201, b.to_json());
    } catch (const Error& e) {
      send_error(res, e);
    }
  }

  void list_bookmarks(const httplib::Request& req, httplib::Response& res) {
    auto s = find_session(req.matches[1]);
    if (!s) return send_error(res, 404, "NotFound", "unknown session");
    json list = json::array();
    std::lock_guard lock(bookmarks_mu);
    for (auto it = bookmarks.rbegin(); it != bookmarks.rend(); ++it)
      if (it->session_id == s->id) list.push_back(it->to_json());
    send_json(res, 200, list);
  }

  void delete_bookmark(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::lock_guard lock(bookmarks_mu);
    const auto it = std::find_if(bookmarks.begin(), bookmarks.end(), [&](const Bookmark& b) { return b.id == id; });
    if (it == bookmarks.end()) return send_error(res, 404, "NotFound", "unknown bookmark");
    append_line(bookmarks_file(), {{"op", "delete"}, {"id", id}});
    bookmarks.erase(it);
    res.status = 204;
  }

  void send_file(httplib::Response& res, const std::string& sha) {
    const auto bytes = read_file(image_path(sha));
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  }

  void bookmark_image(const httplib::Request& req, httplib::Response& res) {
    std::string sha;
    {
      std::lock_guard lock(bookmarks_mu);
      const auto it = std::find_if(bookmarks.begin(), bookmarks.end(), [&](const Bookmark& b) { return b.id == req.matches[1]; });
      if (it == bookmarks.end()) return send_error(res, 404, "NotFound", "unknown bookmark");
      sha = it->image_sha;
    }
    send_file(res, sha);
  }

  void session_image(const httplib::Request& req, httplib::Response& res) {
    auto s = find_session(req.matches[1]);
    if (!s) return send_error(res, 404, "NotFound", "unknown session");
    send_file(res, s->image_sha);
  }

  void routes() {
    using Req = const httplib::Request&;
    using Res = httplib::Response&;
    server.set_payload_max_length(config.max_upload_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Expose-Headers",
                                 "X-Achieved-Proportions, X-Residual, X-Balance-Iterations, X-Balance-Repaired"}});
    server.Options(".*", [](Req, Res res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.set_exception_handler([](Req, Res res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      } catch (...) {
        send_error(res, 500, "Internal", "unknown error");
      }
    });
    server.Get("/health", [](Req, Res res) { send_json(res, 200, {{"status", "ok"}}); });
    server.Post("/images", [this](Req q, Res r) { upload(q, r); });
    server.Get(R"(/images/([0-9a-f]+))", [this](Req q, Res r) { session_image(q, r); });
    server.Get(R"(/images/([0-9a-f]+)/palette)", [this](Req q, Res r) { get_palette(q, r); });
    server.Post(R"(/images/([0-9a-f]+)/recolor)", [this](Req q, Res r) { post_recolor(q, r); });
    server.Post(R"(/images/([0-9a-f]+)/bookmarks)", [this](Req q, Res r) { post_bookmark(q, r); });
    server.Get(R"(/images/([0-9a-f]+)/bookmarks)", [this](Req q, Res r) { list_bookmarks(q, r); });
    server.Delete(R"(/bookmarks/([0-9a-f]+))", [this](Req q, Res r) { delete_bookmark(q, r); });
    server.Get(R"(/bookmarks/([0-9a-f]+)/image)", [this](Req q, Res r) { bookmark_image(q, r); });
  }
};

Service::Service(Config config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

int Service::bind() {
  auto& c = impl_->config;
  if (c.port == 0) {
    const int port = impl_->server.bind_to_any_port(c.host);
    if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + c.host);
    c.port = port;
  } else if (!impl_->server.bind_to_port(c.host, c.port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return c.port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() { impl_->server.wait_until_ready(); }

const Config& Service::config() const { return impl_->config; }

}  // namespace pstudio::service
