// Eigen must precede httplib: resolv.h defines a `_res` macro that breaks Eigen.
#include "meshvote/backend.hpp"
#include "meshvote/error.hpp"
#include "meshvote/image_io.hpp"

#include <spdlog/spdlog.h>

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace meshvote {

HttpBackendOptions HttpBackendOptions::from_url(const std::string& url) {
  HttpBackendOptions opts;
  std::string rest = url;
  if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else if (rest.find("://") != std::string::npos) {
    throw ConfigError("only plain http:// sidecar URLs are supported: " + url);
  }
  while (!rest.empty() && rest.back() == '/') rest.pop_back();
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos) {
    opts.host = rest;
  } else {
    opts.host = rest.substr(0, colon);
    try {
      opts.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("invalid port in sidecar URL: " + url);
    }
  }
  if (opts.host.empty()) throw ConfigError("sidecar URL has no host: " + url);
  return opts;
}

HttpBackend::HttpBackend(HttpBackendOptions options)
    : options_(std::move(options)), in_flight_(std::clamp(options_.max_in_flight, 1, 64)) {}

std::string HttpBackend::post(const std::string& route, const std::string& body) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  httplib::Client client(options_.host, options_.port);
  const auto secs = static_cast<time_t>(options_.timeout_seconds);
  const auto usecs = static_cast<time_t>((options_.timeout_seconds - secs) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(route, body, "application/json");
  if (!res) {
    throw BackendUnavailable("sidecar " + options_.host + ":" + std::to_string(options_.port) +
                             route + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendUnavailable("sidecar " + route + " returned HTTP " + std::to_string(res->status) +
                             ": " + res->body);
  }
  return res->body;
}

std::string HttpBackend::health() {
  httplib::Client client(options_.host, options_.port);
  const auto secs = static_cast<time_t>(options_.timeout_seconds);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  auto res = client.Get("/health");
  if (!res) {
    throw BackendUnavailable("sidecar " + options_.host + ":" + std::to_string(options_.port) +
                             " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendUnavailable("sidecar /health returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::vector<Detection> HttpBackend::detect(const ViewContext& view, const QuerySpec& query) {
  const nlohmann::json request{{"image", base64_encode(encode_png(view.render.image))},
                               {"prompt", query.grounding_text}};
  const auto body = post("/detect", request.dump());
  std::vector<Detection> detections;
  try {
    detections = detections_from_json(body);
  } catch (const ParseError& e) {
    throw BackendUnavailable(std::string("malformed /detect response: ") + e.what());
  }

  // Clip to the image and drop boxes that collapse.
  const double w = view.render.width();
  const double h = view.render.height();
  std::vector<Detection> kept;
  for (Detection d : detections) {
    d.box.x0 = std::clamp(d.box.x0, 0.0, w);
    d.box.x1 = std::clamp(d.box.x1, 0.0, w);
    d.box.y0 = std::clamp(d.box.y0, 0.0, h);
    d.box.y1 = std::clamp(d.box.y1, 0.0, h);
    d.confidence = std::clamp(d.confidence, 0.0, 1.0);
    if (!d.box.valid_within(view.render.width(), view.render.height())) {
      spdlog::warn("sidecar returned an empty box in {} view {}; ignored", branch_name(view.branch),
                   view.view);
      continue;
    }
    kept.push_back(d);
  }
  return kept;
}

MaskImage HttpBackend::segment(const ViewContext& view, const PixelBox& box) {
  const nlohmann::json request{{"image", base64_encode(encode_png(view.render.image))},
                               {"bbox", {box.x0, box.y0, box.x1, box.y1}}};
  const auto body = post("/segment", request.dump());
  MaskImage mask;
  try {
    const auto response = nlohmann::json::parse(body);
    mask = decode_mask_png(base64_decode(response.at("mask").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw BackendUnavailable(std::string("malformed /segment response: ") + e.what());
  } catch (const ParseError& e) {
    throw BackendUnavailable(std::string("malformed /segment mask: ") + e.what());
  }
  if (!mask.same_size(view.render.face_index_map)) {
    throw DimensionMismatch("sidecar mask size differs from the rendered view");
  }
  return mask;
}

}  // namespace meshvote
