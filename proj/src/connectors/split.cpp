#include "nstream/connectors/split.hpp"

#include <algorithm>

namespace nstream {

std::string_view to_string(SplitConnector::Status status) noexcept {
  switch (status) {
    case SplitConnector::Status::ok: return "ok";
    case SplitConnector::Status::partial: return "partial";
    case SplitConnector::Status::failed: break;
  }
  return "failed";
}

SplitConnector::SplitConnector(std::vector<Connector*> children) : children_(std::move(children)) {
  if (children_.size() < 2) throw Error(Errc::param, "split needs at least two children");
  for (std::size_t i = 0; i < children_.size(); ++i) {
    children_[i]->set_error_sink([this, i](EndpointSession& s, const Error& e) { on_child_error(i, s, e); });
  }
}

void SplitConnector::on_child_error(std::size_t index, EndpointSession& session, const Error& error) {
  auto it = status_.find(&session);
  if (it == status_.end()) {
    session.service_error(error);
    return;
  }
  session.record("split-child-error", std::to_string(index) + " " + std::string(to_string(error.code())));
  if (it->second[index] == ChildStatus::failed) return;
  it->second[index] = ChildStatus::failed;
  children_[index]->stop(session);
  if (std::all_of(it->second.begin(), it->second.end(), [](ChildStatus s) { return s == ChildStatus::failed; }))
    session.service_error(error);
}

void SplitConnector::publish(EndpointSession& session) {
  status_[&session] = std::vector<ChildStatus>(children_.size(), ChildStatus::ok);
  for (auto* c : children_) c->publish(session);
}

void SplitConnector::subscribe(EndpointSession& session) {
  // A subscriber reads from one stream; the first child serves it.
  status_[&session] = std::vector<ChildStatus>(children_.size(), ChildStatus::ok);
  children_.front()->subscribe(session);
}

void SplitConnector::stop(EndpointSession& session) {
  for (auto* c : children_) c->stop(session);
}

void SplitConnector::add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) {
  auto it = status_.find(&session);
  for (std::size_t i = 0; i < children_.size(); ++i)
    if (it == status_.end() || it->second[i] == ChildStatus::ok) children_[i]->add_tracks(session, tracks);
}

void SplitConnector::remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) {
  auto it = status_.find(&session);
  for (std::size_t i = 0; i < children_.size(); ++i)
    if (it == status_.end() || it->second[i] == ChildStatus::ok) children_[i]->remove_tracks(session, labels);
}

void SplitConnector::relay(EndpointSession& /*session*/, const PeerLink& /*link*/, MessageKind /*kind*/,
                           std::string /*payload*/) {
  // Links are always owned by a child, which relays for itself.
}

std::vector<SplitConnector::ChildStatus> SplitConnector::child_status(const EndpointSession& session) const {
  auto it = status_.find(&session);
  return it == status_.end() ? std::vector<ChildStatus>(children_.size(), ChildStatus::ok) : it->second;
}

SplitConnector::Status SplitConnector::status(const EndpointSession& session) const {
  auto s = child_status(session);
  auto failed = std::count(s.begin(), s.end(), ChildStatus::failed);
  if (failed == 0) return Status::ok;
  return failed == static_cast<long>(s.size()) ? Status::failed : Status::partial;
}

}  // namespace nstream
