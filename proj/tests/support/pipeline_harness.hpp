#pragma once

#include <map>
#include <memory>
#include <string>

#include "compass/neural/providers.hpp"
#include "compass/pipeline/pipeline.hpp"
#include "compass/session/session_store.hpp"
#include "support/fixtures.hpp"

namespace compass::fixtures {

inline neural::LlmConfig mock_llm_config() {
  neural::LlmConfig cfg;
  cfg.provider_id = "mock";
  cfg.model_id = "mock-1";
  return cfg;
}

inline neural::MockTranscript shipped_transcript() {
  return neural::MockTranscript::from_file(config_path("mock/transcript.json"));
}

// Shipped schemas, catalogs and graphs behind a loopback endpoint, an
// in-memory session store and the scripted mock provider.
struct PipelineHarness {
  std::shared_ptr<schema::SchemaRegistry> schemas = shipped_schemas();
  std::shared_ptr<catalog::Catalog> catalog = shipped_catalog(schemas);
  std::unique_ptr<sparql::FixtureEndpoint> endpoint = start_shipped_endpoint();
  std::shared_ptr<session::SessionStore> store =
      std::make_shared<session::SessionStore>(std::make_shared<session::MemoryBackend>());
  std::shared_ptr<neural::MockProvider> mock;
  std::unique_ptr<pipeline::Pipeline> pipeline;

  explicit PipelineHarness(neural::MockTranscript transcript = shipped_transcript()) {
    mock = std::make_shared<neural::MockProvider>(std::move(transcript));
    auto registry = std::make_shared<neural::ProviderRegistry>();
    registry->add(mock);
    pipeline::PipelineDeps deps;
    deps.schemas = schemas;
    deps.catalog = catalog;
    deps.sessions = store;
    deps.neural = std::make_shared<neural::NeuralLayer>(registry);
    for (const char* uc : kUseCases) deps.endpoints[uc] = endpoint_config(std::string("/") + uc + "/sparql");
    pipeline = std::make_unique<pipeline::Pipeline>(std::move(deps));
  }

  sparql::EndpointConfig endpoint_config(const std::string& path) const {
    sparql::EndpointConfig ep;
    ep.url = endpoint->url(path);
    ep.timeout = std::chrono::milliseconds(5000);
    ep.max_retries = 0;
    return ep;
  }
};

}  // namespace compass::fixtures
