//! One orchestration session: discovery, then planning and execution
//! against the sealed context only.

use std::collections::BTreeSet;

use dalia_core::executor::ExecuteError;
use dalia_core::{
    discover, execute, plan, CapabilityEndpoint, DiscoveryError, ExecutionContext, ExecutionTrace,
    Goal, SlotName, TaskGraph,
};
use dalia_wire::{connect_in, RemoteDirectory, RemoteServer, Transport, WireInvoker};

use crate::config::OrchestratorConfig;

pub struct Session {
    servers: Vec<RemoteServer>,
    directory: RemoteDirectory,
}

impl Session {
    /// Open every endpoint named in `cfg`. A stdio endpoint whose command
    /// cannot be started is reported as unreachable.
    pub fn open(cfg: &OrchestratorConfig) -> Result<Self, DiscoveryError> {
        let dir = cfg.base_dir.as_deref();
        let open = |address: &str| {
            connect_in(address, dir).map_err(|e| DiscoveryError::EndpointUnreachable {
                endpoint: address.to_string(),
                reason: e.to_string(),
            })
        };
        let servers = cfg
            .servers
            .iter()
            .map(|a| open(a))
            .collect::<Result<Vec<_>, _>>()?;
        let directory = open(&cfg.directory)?;
        Ok(Self::from_transports(servers, directory))
    }

    pub fn from_transports(
        servers: Vec<Box<dyn Transport>>,
        directory: Box<dyn Transport>,
    ) -> Self {
        Self {
            servers: servers.into_iter().map(RemoteServer::new).collect(),
            directory: RemoteDirectory::new(directory),
        }
    }

    pub fn discover(
        &mut self,
        provided: BTreeSet<SlotName>,
    ) -> Result<ExecutionContext, DiscoveryError> {
        let mut endpoints: Vec<&mut dyn CapabilityEndpoint> = self
            .servers
            .iter_mut()
            .map(|s| s as &mut dyn CapabilityEndpoint)
            .collect();
        discover(&mut endpoints, &mut self.directory, provided)
    }

    /// Plan `goal` and run it. No discovery method is called past this point.
    pub fn plan_and_run(
        self,
        goal: &Goal,
        ctx: &ExecutionContext,
    ) -> Result<(TaskGraph, Result<ExecutionTrace, ExecuteError>), dalia_core::PlanError> {
        let graph = plan(goal, ctx)?;
        let mut invoker = WireInvoker::from_servers(self.servers);
        let trace = execute(&graph, goal, ctx, &mut invoker);
        Ok((graph, trace))
    }
}
