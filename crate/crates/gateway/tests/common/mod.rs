#![allow(dead_code)]

use std::sync::Arc;

use provchain_gateway::{http, Gateway};
use serde_json::Value;

pub struct Server {
    pub base: String,
    pub client: reqwest::Client,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Server {
    pub async fn start(gateway: Arc<Gateway>) -> Self {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let task = tokio::spawn(http::serve(gateway, listener));
        Self {
            base,
            client: reqwest::Client::new(),
            task,
        }
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap())
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let resp = self
            .client
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap())
    }

    pub fn stop(self) {
        self.task.abort();
    }
}

/// Endpoint for each write operation name.
pub fn endpoint(op: &str) -> &'static str {
    match op {
        "deploy_token" => "/contracts/token",
        "deploy_certificate" => "/contracts/certificate",
        "certify" => "/certify",
        "revoke" => "/revoke",
        "add_batch" => "/batches",
        "split_batch" => "/batches/split",
        "merge_batch" => "/batches/merge",
        "transfer_batch" => "/batches/transfer",
        "consume_batch" => "/batches/consume",
        other => panic!("no endpoint for {other}"),
    }
}
