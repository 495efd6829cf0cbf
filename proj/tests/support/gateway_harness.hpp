/*
 * Copyright 2026 The Meterguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "meterguard/gateway.hpp"

namespace meterguard::testsupport {

// In-memory sink with a fault switch, for fail-closed tests.
class SwitchableSink final : public gateway::AuditSink {
 public:
  explicit SwitchableSink(std::shared_ptr<std::atomic<bool>> fail) : fail_(std::move(fail)) {}
  void persist(const gateway::AuditRecord& record) override;

 private:
  std::shared_ptr<std::atomic<bool>> fail_;
};

struct GatewayRig {
  std::unique_ptr<gateway::Gateway> gw;
  std::shared_ptr<std::atomic<bool>> fail_audit = std::make_shared<std::atomic<bool>>(false);
};

// Six hourly meters over one day with zip and customer-class attributes:
// zip 94110 x3 (residential), 94609 x2 (residential), 10001 x1 (commercial).
gateway::GatewayData small_gateway_data();

GatewayRig make_rig(gateway::PolicyConfig policy, gateway::GatewayData data,
                    std::uint64_t seed = 1);

gateway::RequestEnvelope envelope(std::string id, std::string requester,
                                  gateway::Purpose purpose, bool consent,
                                  gateway::Operation op);

}  // namespace meterguard::testsupport
