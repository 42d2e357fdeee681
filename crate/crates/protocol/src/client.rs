//! Blocking client for the emulator (or real hardware speaking the same lines).

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use thiserror::Error;

use crate::frame::{decode_reply, encode, CommandFrame, EncodeError, ParseError, Reply};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("bad reply: {0}")]
    Parse(#[from] ParseError),
    #[error("NACK {seq}: {reason}")]
    Nack { seq: u64, reason: String },
    #[error("reply for sequence {found}, expected {expected}")]
    Mismatch { expected: u64, found: u64 },
    #[error("connection closed")]
    Closed,
}

pub struct ActuatorClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_seq: u64,
}

impl ActuatorClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_secs(5)))?;
        Ok(Self {
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
            next_seq: 1,
        })
    }

    pub fn set(&mut self, angles: [f64; 4]) -> Result<u64, ClientError> {
        let seq = self.bump();
        match self.exchange(&CommandFrame::Set { seq, angles })? {
            Reply::Ack { .. } => Ok(seq),
            other => Err(unexpected(seq, other)),
        }
    }

    pub fn get(&mut self) -> Result<[f64; 4], ClientError> {
        let seq = self.bump();
        match self.exchange(&CommandFrame::Get { seq })? {
            Reply::Pos { angles, .. } => Ok(angles),
            other => Err(unexpected(seq, other)),
        }
    }

    pub fn ping(&mut self) -> Result<(), ClientError> {
        let seq = self.bump();
        match self.exchange(&CommandFrame::Ping { seq })? {
            Reply::Ack { .. } => Ok(()),
            other => Err(unexpected(seq, other)),
        }
    }

    /// Sends raw bytes and returns the reply line, for probing the server.
    pub fn raw(&mut self, line: &[u8]) -> Result<Reply, ClientError> {
        self.writer.write_all(line)?;
        self.read_reply()
    }

    fn bump(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }

    fn exchange(&mut self, frame: &CommandFrame) -> Result<Reply, ClientError> {
        self.writer.write_all(&encode(frame)?)?;
        let reply = self.read_reply()?;
        let found = match &reply {
            Reply::Ack { seq } | Reply::Nack { seq, .. } | Reply::Pos { seq, .. } => *seq,
        };
        if let Reply::Nack { seq, reason } = reply {
            return Err(ClientError::Nack { seq, reason });
        }
        if found != frame.seq() {
            return Err(ClientError::Mismatch {
                expected: frame.seq(),
                found,
            });
        }
        Ok(reply)
    }

    fn read_reply(&mut self) -> Result<Reply, ClientError> {
        let mut line = Vec::new();
        if self.reader.read_until(b'\n', &mut line)? == 0 {
            return Err(ClientError::Closed);
        }
        Ok(decode_reply(&line)?)
    }
}

fn unexpected(seq: u64, reply: Reply) -> ClientError {
    match reply {
        Reply::Nack { seq, reason } => ClientError::Nack { seq, reason },
        _ => ClientError::Mismatch { expected: seq, found: seq },
    }
}
