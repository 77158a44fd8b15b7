//! JSON-RPC 2.0 transport for capability servers and the agent directory.

pub mod client;
pub mod codec;
pub mod directory_service;
pub mod endpoint;
pub mod error;
pub mod fixtures;
pub mod handler;
pub mod router;
pub mod server;
pub mod transport;

pub use client::{
    connect, connect_in, CallCounts, ClientError, CountingClient, LocalClient, Transport,
};
pub use directory_service::DirectoryService;
pub use endpoint::{RemoteDirectory, RemoteServer, WireInvoker};
pub use error::ErrorObject;
pub use router::{MethodClass, Router};
pub use server::{CapabilityServer, ConfigError, ServerConfig};
pub use transport::{serve_stdio, serve_tcp, ServeError, ServerHandle};
