//! Minimal unpickler for the Planetoid dataset files.
//!
//! Supports protocols 0 through 5 as far as the opcodes needed for numpy
//! arrays, scipy CSR matrices, dicts, defaultdicts and lists. Class
//! construction is not executed: `REDUCE`, `NEWOBJ` and `BUILD` produce
//! [`Value::Instance`] nodes that callers interpret structurally.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

pub type Obj = Rc<RefCell<Value>>;

#[derive(Debug, Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Bytes(Vec<u8>),
    List(Vec<Obj>),
    Tuple(Vec<Obj>),
    Dict(Vec<(Obj, Obj)>),
    Set(Vec<Obj>),
    Global {
        module: String,
        name: String,
    },
    Instance {
        class: Obj,
        args: Obj,
        state: Option<Obj>,
        items: Vec<(Obj, Obj)>,
        elements: Vec<Obj>,
    },
}

fn obj(v: Value) -> Obj {
    Rc::new(RefCell::new(v))
}

fn err(msg: impl Into<String>) -> Error {
    Error::Pickle(msg.into())
}

impl Value {
    /// `(module, name)` of a global or of an instance's class.
    pub fn class_name(&self) -> Option<(String, String)> {
        match self {
            Value::Global { module, name } => Some((module.clone(), name.clone())),
            Value::Instance { class, .. } => class.borrow().class_name(),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| err(format!("truncated input at byte {}", self.pos)))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn byte(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<usize> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]) as usize)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn i32(&mut self) -> Result<i64> {
        let b = self.take(4)?;
        Ok(i32::from_le_bytes(b.try_into().unwrap()) as i64)
    }

    fn u64(&mut self) -> Result<usize> {
        let b = self.take(8)?;
        usize::try_from(u64::from_le_bytes(b.try_into().unwrap()))
            .map_err(|_| err("length overflow"))
    }

    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.data[self.pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err("unterminated text argument"))?;
        self.pos += nl + 1;
        std::str::from_utf8(&rest[..nl]).map_err(|_| err("non-utf8 text argument"))
    }
}

fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

fn le_signed(bytes: &[u8]) -> Result<i64> {
    if bytes.is_empty() {
        return Ok(0);
    }
    if bytes.len() > 8 {
        // Accept wide encodings of values that still fit in 64 bits.
        let (low, high) = bytes.split_at(8);
        let fill = if low[7] & 0x80 != 0 { 0xff } else { 0 };
        if high.iter().any(|&b| b != fill) {
            return Err(err("integer does not fit in 64 bits"));
        }
        return le_signed(low);
    }
    let fill = if bytes[bytes.len() - 1] & 0x80 != 0 {
        0xff
    } else {
        0
    };
    let mut buf = [fill; 8];
    buf[..bytes.len()].copy_from_slice(bytes);
    Ok(i64::from_le_bytes(buf))
}

fn parse_text_int(s: &str) -> Result<Value> {
    let s = s.trim().trim_end_matches('L');
    match s {
        "00" => return Ok(Value::Bool(false)),
        "01" => return Ok(Value::Bool(true)),
        _ => {}
    }
    s.parse::<i64>()
        .map(Value::Int)
        .map_err(|_| err(format!("bad integer literal `{s}`")))
}

fn unquote(s: &str) -> Result<Vec<u8>> {
    let s = s.trim();
    let inner = s
        .strip_prefix('\'')
        .and_then(|t| t.strip_suffix('\''))
        .or_else(|| s.strip_prefix('"').and_then(|t| t.strip_suffix('"')))
        .ok_or_else(|| err("bad STRING literal"))?;
    let mut out = Vec::new();
    let mut chars = inner.bytes().peekable();
    while let Some(c) = chars.next() {
        if c != b'\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some(b'n') => out.push(b'\n'),
            Some(b't') => out.push(b'\t'),
            Some(b'r') => out.push(b'\r'),
            Some(b'x') => {
                let h: Vec<u8> = (0..2).filter_map(|_| chars.next()).collect();
                let h = std::str::from_utf8(&h).map_err(|_| err("bad escape"))?;
                out.push(u8::from_str_radix(h, 16).map_err(|_| err("bad escape"))?);
            }
            Some(other) => out.push(other),
            None => return Err(err("dangling escape")),
        }
    }
    Ok(out)
}

struct Machine {
    stack: Vec<Obj>,
    marks: Vec<usize>,
    memo: std::collections::HashMap<usize, Obj>,
}

impl Machine {
    fn pop(&mut self) -> Result<Obj> {
        self.stack.pop().ok_or_else(|| err("stack underflow"))
    }

    fn top(&self) -> Result<Obj> {
        self.stack
            .last()
            .cloned()
            .ok_or_else(|| err("stack underflow"))
    }

    fn pop_mark(&mut self) -> Result<Vec<Obj>> {
        let m = self.marks.pop().ok_or_else(|| err("missing MARK"))?;
        if m > self.stack.len() {
            return Err(err("MARK beyond stack"));
        }
        Ok(self.stack.split_off(m))
    }

    fn push(&mut self, v: Value) {
        self.stack.push(obj(v));
    }

    fn memo_get(&self, idx: usize) -> Result<Obj> {
        self.memo
            .get(&idx)
            .cloned()
            .ok_or_else(|| err(format!("memo key {idx} missing")))
    }

    fn set_items(target: &Obj, pairs: Vec<(Obj, Obj)>) -> Result<()> {
        match &mut *target.borrow_mut() {
            Value::Dict(items) | Value::Instance { items, .. } => {
                items.extend(pairs);
                Ok(())
            }
            other => Err(err(format!("SETITEM on {}", kind(other)))),
        }
    }

    fn append(target: &Obj, values: Vec<Obj>) -> Result<()> {
        match &mut *target.borrow_mut() {
            Value::List(items)
            | Value::Instance {
                elements: items, ..
            } => {
                items.extend(values);
                Ok(())
            }
            other => Err(err(format!("APPEND on {}", kind(other)))),
        }
    }

    fn reduce(callable: Obj, args: Obj) -> Result<Value> {
        let name = callable.borrow().class_name();
        if let Some((module, name)) = &name {
            match (module.as_str(), name.as_str()) {
                ("_codecs", "encode") => {
                    let args = args.borrow();
                    let Value::Tuple(a) = &*args else {
                        return Err(err("_codecs.encode expects a tuple"));
                    };
                    let text = a
                        .first()
                        .and_then(|s| s.borrow().as_str().map(str::to_string))
                        .ok_or_else(|| err("_codecs.encode expects a string"))?;
                    let bytes = text
                        .chars()
                        .map(|c| u8::try_from(c as u32).map_err(|_| err("non-latin1 char")))
                        .collect::<Result<Vec<u8>>>()?;
                    return Ok(Value::Bytes(bytes));
                }
                ("__builtin__" | "builtins", "set" | "frozenset") => {
                    let args = args.borrow();
                    let elems = match &*args {
                        Value::Tuple(a) => match a.first().map(|x| x.borrow().clone()) {
                            Some(Value::List(l)) => l,
                            None => Vec::new(),
                            _ => return Err(err("set() expects a list")),
                        },
                        _ => return Err(err("set() expects a tuple")),
                    };
                    return Ok(Value::Set(elems));
                }
                ("__builtin__" | "builtins", "bytearray" | "bytes") => {
                    let args = args.borrow();
                    if let Value::Tuple(a) = &*args {
                        match a.first().map(|x| x.borrow().clone()) {
                            Some(Value::Bytes(b)) => return Ok(Value::Bytes(b)),
                            None => return Ok(Value::Bytes(Vec::new())),
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(Value::Instance {
            class: callable,
            args,
            state: None,
            items: Vec::new(),
            elements: Vec::new(),
        })
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::None => "None",
        Value::Bool(_) => "bool",
        Value::Int(_) => "int",
        Value::Float(_) => "float",
        Value::Str(_) => "str",
        Value::Bytes(_) => "bytes",
        Value::List(_) => "list",
        Value::Tuple(_) => "tuple",
        Value::Dict(_) => "dict",
        Value::Set(_) => "set",
        Value::Global { .. } => "global",
        Value::Instance { .. } => "instance",
    }
}

/// Runs the pickle program in `data` and returns the top-level object.
pub fn unpickle(data: &[u8]) -> Result<Obj> {
    let mut r = Reader { data, pos: 0 };
    let mut m = Machine {
        stack: Vec::new(),
        marks: Vec::new(),
        memo: Default::default(),
    };
    loop {
        let op = r.byte()?;
        match op {
            0x80 => {
                r.byte()?;
            }
            0x95 => {
                r.take(8)?;
            }
            b'.' => return m.pop(),
            b'(' => m.marks.push(m.stack.len()),
            b'0' => {
                m.pop()?;
            }
            b'1' => {
                m.pop_mark()?;
            }
            b'2' => {
                let t = m.top()?;
                m.stack.push(t);
            }
            b'N' => m.push(Value::None),
            0x88 => m.push(Value::Bool(true)),
            0x89 => m.push(Value::Bool(false)),
            b'I' => {
                let v = parse_text_int(r.line()?)?;
                m.push(v);
            }
            b'L' => {
                let v = parse_text_int(r.line()?)?;
                m.push(v);
            }
            b'J' => {
                let v = r.i32()?;
                m.push(Value::Int(v));
            }
            b'K' => {
                let v = r.byte()? as i64;
                m.push(Value::Int(v));
            }
            b'M' => {
                let v = r.u16()? as i64;
                m.push(Value::Int(v));
            }
            0x8a => {
                let n = r.byte()? as usize;
                let v = le_signed(r.take(n)?)?;
                m.push(Value::Int(v));
            }
            0x8b => {
                let n = r.u32()?;
                let v = le_signed(r.take(n)?)?;
                m.push(Value::Int(v));
            }
            b'F' => {
                let s = r.line()?;
                let v = s
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| err("bad float literal"))?;
                m.push(Value::Float(v));
            }
            b'G' => {
                let b = r.take(8)?;
                m.push(Value::Float(f64::from_be_bytes(b.try_into().unwrap())));
            }
            // Python 2 `str` payloads are raw bytes.
            b'S' => {
                let v = unquote(r.line()?)?;
                m.push(Value::Bytes(v));
            }
            b'T' => {
                let n = r.u32()?;
                let v = r.take(n)?.to_vec();
                m.push(Value::Bytes(v));
            }
            b'U' => {
                let n = r.byte()? as usize;
                let v = r.take(n)?.to_vec();
                m.push(Value::Bytes(v));
            }
            b'B' => {
                let n = r.u32()?;
                let v = r.take(n)?.to_vec();
                m.push(Value::Bytes(v));
            }
            b'C' => {
                let n = r.byte()? as usize;
                let v = r.take(n)?.to_vec();
                m.push(Value::Bytes(v));
            }
            0x8e | 0x96 => {
                let n = r.u64()?;
                let v = r.take(n)?.to_vec();
                m.push(Value::Bytes(v));
            }
            b'V' => {
                let s = r.line()?.to_string();
                m.push(Value::Str(s));
            }
            b'X' => {
                let n = r.u32()?;
                let s = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| err("bad utf8"))?;
                m.push(Value::Str(s));
            }
            0x8c => {
                let n = r.byte()? as usize;
                let s = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| err("bad utf8"))?;
                m.push(Value::Str(s));
            }
            0x8d => {
                let n = r.u64()?;
                let s = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| err("bad utf8"))?;
                m.push(Value::Str(s));
            }
            b']' => m.push(Value::List(Vec::new())),
            b'}' => m.push(Value::Dict(Vec::new())),
            b')' => m.push(Value::Tuple(Vec::new())),
            0x8f => m.push(Value::Set(Vec::new())),
            b'l' => {
                let items = m.pop_mark()?;
                m.push(Value::List(items));
            }
            b't' => {
                let items = m.pop_mark()?;
                m.push(Value::Tuple(items));
            }
            0x91 => {
                let items = m.pop_mark()?;
                m.push(Value::Set(items));
            }
            0x85..=0x87 => {
                let n = (op - 0x84) as usize;
                if m.stack.len() < n {
                    return Err(err("stack underflow in TUPLEn"));
                }
                let items = m.stack.split_off(m.stack.len() - n);
                m.push(Value::Tuple(items));
            }
            b'd' => {
                let items = m.pop_mark()?;
                if items.len() % 2 != 0 {
                    return Err(err("odd DICT item count"));
                }
                let pairs = items
                    .chunks(2)
                    .map(|c| (c[0].clone(), c[1].clone()))
                    .collect();
                m.push(Value::Dict(pairs));
            }
            b'a' => {
                let v = m.pop()?;
                Machine::append(&m.top()?, vec![v])?;
            }
            b'e' => {
                let items = m.pop_mark()?;
                Machine::append(&m.top()?, items)?;
            }
            0x90 => {
                let items = m.pop_mark()?;
                let target = m.top()?;
                let mut t = target.borrow_mut();
                match &mut *t {
                    Value::Set(s) => s.extend(items),
                    other => return Err(err(format!("ADDITEMS on {}", kind(other)))),
                }
            }
            b's' => {
                let v = m.pop()?;
                let k = m.pop()?;
                Machine::set_items(&m.top()?, vec![(k, v)])?;
            }
            b'u' => {
                let items = m.pop_mark()?;
                if items.len() % 2 != 0 {
                    return Err(err("odd SETITEMS item count"));
                }
                let pairs = items
                    .chunks(2)
                    .map(|c| (c[0].clone(), c[1].clone()))
                    .collect();
                Machine::set_items(&m.top()?, pairs)?;
            }
            b'p' => {
                let idx = r.line()?.trim().parse().map_err(|_| err("bad PUT index"))?;
                m.memo.insert(idx, m.top()?);
            }
            b'q' => {
                let idx = r.byte()? as usize;
                m.memo.insert(idx, m.top()?);
            }
            b'r' => {
                let idx = r.u32()?;
                m.memo.insert(idx, m.top()?);
            }
            0x94 => {
                let idx = m.memo.len();
                m.memo.insert(idx, m.top()?);
            }
            b'g' => {
                let idx = r.line()?.trim().parse().map_err(|_| err("bad GET index"))?;
                let v = m.memo_get(idx)?;
                m.stack.push(v);
            }
            b'h' => {
                let idx = r.byte()? as usize;
                let v = m.memo_get(idx)?;
                m.stack.push(v);
            }
            b'j' => {
                let idx = r.u32()?;
                let v = m.memo_get(idx)?;
                m.stack.push(v);
            }
            b'c' => {
                let module = r.line()?.to_string();
                let name = r.line()?.to_string();
                m.push(Value::Global { module, name });
            }
            0x93 => {
                let name = m.pop()?;
                let module = m.pop()?;
                let (Some(module), Some(name)) = (
                    module.borrow().as_str().map(str::to_string),
                    name.borrow().as_str().map(str::to_string),
                ) else {
                    return Err(err("STACK_GLOBAL expects two strings"));
                };
                m.push(Value::Global { module, name });
            }
            b'R' => {
                let args = m.pop()?;
                let callable = m.pop()?;
                let v = Machine::reduce(callable, args)?;
                m.push(v);
            }
            0x81 => {
                let args = m.pop()?;
                let class = m.pop()?;
                m.push(Value::Instance {
                    class,
                    args,
                    state: None,
                    items: Vec::new(),
                    elements: Vec::new(),
                });
            }
            0x92 => {
                let _kwargs = m.pop()?;
                let args = m.pop()?;
                let class = m.pop()?;
                m.push(Value::Instance {
                    class,
                    args,
                    state: None,
                    items: Vec::new(),
                    elements: Vec::new(),
                });
            }
            b'o' => {
                let mut items = m.pop_mark()?;
                if items.is_empty() {
                    return Err(err("OBJ without class"));
                }
                let class = items.remove(0);
                m.push(Value::Instance {
                    class,
                    args: obj(Value::Tuple(items)),
                    state: None,
                    items: Vec::new(),
                    elements: Vec::new(),
                });
            }
            b'i' => {
                let module = r.line()?.to_string();
                let name = r.line()?.to_string();
                let items = m.pop_mark()?;
                m.push(Value::Instance {
                    class: obj(Value::Global { module, name }),
                    args: obj(Value::Tuple(items)),
                    state: None,
                    items: Vec::new(),
                    elements: Vec::new(),
                });
            }
            b'b' => {
                let st = m.pop()?;
                let target = m.top()?;
                let mut t = target.borrow_mut();
                match &mut *t {
                    Value::Instance { state, .. } => *state = Some(st),
                    other => return Err(err(format!("BUILD on {}", kind(other)))),
                }
            }
            0x97 => {
                // NEXT_BUFFER: out-of-band buffers are not supported.
                return Err(err("out-of-band pickle buffers are not supported"));
            }
            0x98 => {}
            other => {
                return Err(err(format!(
                    "unsupported opcode 0x{other:02x} at byte {}",
                    r.pos - 1
                )))
            }
        }
    }
}

/// Dense numeric array decoded from a numpy pickle.
#[derive(Debug, Clone, PartialEq)]
pub struct NdArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

fn tuple_items(o: &Obj) -> Result<Vec<Obj>> {
    match &*o.borrow() {
        Value::Tuple(t) | Value::List(t) => Ok(t.clone()),
        other => Err(err(format!("expected tuple, found {}", kind(other)))),
    }
}

fn int_of(o: &Obj) -> Result<i64> {
    o.borrow().as_int().ok_or_else(|| err("expected integer"))
}

fn shape_of(o: &Obj) -> Result<Vec<usize>> {
    match &*o.borrow() {
        Value::Int(i) => return Ok(vec![*i as usize]),
        Value::Tuple(_) | Value::List(_) => {}
        other => return Err(err(format!("bad shape {}", kind(other)))),
    }
    tuple_items(o)?
        .iter()
        .map(|x| int_of(x).map(|i| i as usize))
        .collect()
}

fn bytes_of(o: &Obj) -> Result<Vec<u8>> {
    match &*o.borrow() {
        Value::Bytes(b) => Ok(b.clone()),
        Value::Str(s) => s
            .chars()
            .map(|c| u8::try_from(c as u32).map_err(|_| err("non-latin1 payload")))
            .collect(),
        other => Err(err(format!("expected raw bytes, found {}", kind(other)))),
    }
}

/// `(kind, width, big_endian)` of a numpy dtype object or descriptor string.
fn dtype_of(o: &Obj) -> Result<(char, usize, bool)> {
    let v = o.borrow();
    let (descr, order) = match &*v {
        Value::Str(s) => (s.clone(), None),
        Value::Bytes(b) => (latin1(b), None),
        Value::Instance { args, state, .. } => {
            let a = tuple_items(args)?;
            let descr = a
                .first()
                .map(bytes_of)
                .transpose()?
                .map(|b| latin1(&b))
                .ok_or_else(|| err("dtype without descriptor"))?;
            let order = match state {
                Some(s) => tuple_items(s)?
                    .get(1)
                    .and_then(|x| bytes_of(x).ok())
                    .and_then(|b| b.first().copied()),
                None => None,
            };
            (descr, order.map(|b| b as char))
        }
        other => return Err(err(format!("bad dtype {}", kind(other)))),
    };
    let mut chars = descr.chars().peekable();
    let mut big = order == Some('>');
    if let Some(&c) = chars.peek() {
        if "<>|=".contains(c) {
            big = c == '>';
            chars.next();
        }
    }
    let kind_c = chars.next().ok_or_else(|| err("empty dtype"))?;
    let width: usize = chars
        .collect::<String>()
        .parse()
        .map_err(|_| err(format!("unsupported dtype `{descr}`")))?;
    Ok((kind_c, width, big))
}

fn decode(raw: &[u8], (kind_c, width, big): (char, usize, bool), count: usize) -> Result<Vec<f64>> {
    if raw.len() != count * width {
        return Err(err(format!(
            "array payload has {} bytes, expected {}",
            raw.len(),
            count * width
        )));
    }
    let mut out = Vec::with_capacity(count);
    for chunk in raw.chunks_exact(width) {
        let mut b = chunk.to_vec();
        if big {
            b.reverse();
        }
        let v = match (kind_c, width) {
            ('f', 4) => f32::from_le_bytes(b[..].try_into().unwrap()) as f64,
            ('f', 8) => f64::from_le_bytes(b[..].try_into().unwrap()),
            ('i', 1) => b[0] as i8 as f64,
            ('i', 2) => i16::from_le_bytes(b[..].try_into().unwrap()) as f64,
            ('i', 4) => i32::from_le_bytes(b[..].try_into().unwrap()) as f64,
            ('i', 8) => i64::from_le_bytes(b[..].try_into().unwrap()) as f64,
            ('u' | 'b', 1) => b[0] as f64,
            ('u', 2) => u16::from_le_bytes(b[..].try_into().unwrap()) as f64,
            ('u', 4) => u32::from_le_bytes(b[..].try_into().unwrap()) as f64,
            ('u', 8) => u64::from_le_bytes(b[..].try_into().unwrap()) as f64,
            _ => return Err(err(format!("unsupported dtype {kind_c}{width}"))),
        };
        out.push(v);
    }
    Ok(out)
}

impl NdArray {
    /// Interprets a pickled `numpy.ndarray`.
    pub fn from_pickle(o: &Obj) -> Result<NdArray> {
        let v = o.borrow();
        let Value::Instance {
            class, args, state, ..
        } = &*v
        else {
            return Err(err(format!("expected ndarray, found {}", kind(&v))));
        };
        let (_, name) = class.borrow().class_name().unwrap_or_default();
        match name.as_str() {
            "_reconstruct" => {
                let st = state.as_ref().ok_or_else(|| err("ndarray without state"))?;
                let mut items = tuple_items(st)?;
                if items.len() == 5 {
                    items.remove(0);
                }
                let [shape, dtype, fortran, raw] = <[Obj; 4]>::try_from(items)
                    .map_err(|_| err("unexpected ndarray state layout"))?;
                let shape = shape_of(&shape)?;
                let count = shape.iter().product();
                let mut data = decode(&bytes_of(&raw)?, dtype_of(&dtype)?, count)?;
                if int_of(&fortran).unwrap_or(0) != 0 && shape.len() == 2 {
                    data = transpose(&data, shape[1], shape[0]);
                }
                Ok(NdArray { shape, data })
            }
            "_frombuffer" => {
                let a = tuple_items(args)?;
                if a.len() < 3 {
                    return Err(err("_frombuffer expects (buffer, dtype, shape, order)"));
                }
                let shape = shape_of(&a[2])?;
                let count = shape.iter().product();
                let mut data = decode(&bytes_of(&a[0])?, dtype_of(&a[1])?, count)?;
                let order = a.get(3).map(bytes_of).transpose()?.unwrap_or_default();
                if order == b"F" && shape.len() == 2 {
                    data = transpose(&data, shape[1], shape[0]);
                }
                Ok(NdArray { shape, data })
            }
            other => Err(err(format!("expected ndarray, found class `{other}`"))),
        }
    }

    /// Interprets a pickled `scipy.sparse.csr_matrix` as a dense row-major array.
    pub fn from_csr_pickle(o: &Obj) -> Result<NdArray> {
        let v = o.borrow();
        let Value::Instance { class, state, .. } = &*v else {
            return Err(err(format!("expected csr_matrix, found {}", kind(&v))));
        };
        let (_, name) = class.borrow().class_name().unwrap_or_default();
        if !name.starts_with("csr_") {
            return Err(err(format!("expected csr_matrix, found class `{name}`")));
        }
        let st = state
            .as_ref()
            .ok_or_else(|| err("csr_matrix without state"))?;
        let st = st.borrow();
        let Value::Dict(fields) = &*st else {
            return Err(err("csr_matrix state is not a dict"));
        };
        let field = |key: &str| {
            fields
                .iter()
                .find(|(k, _)| {
                    k.borrow().as_str() == Some(key)
                        || matches!(&*k.borrow(), Value::Bytes(b) if b == key.as_bytes())
                })
                .map(|(_, v)| v.clone())
        };
        let shape = field("_shape")
            .or_else(|| field("shape"))
            .ok_or_else(|| err("csr_matrix without shape"))?;
        let shape = shape_of(&shape)?;
        if shape.len() != 2 {
            return Err(err("csr_matrix shape must be 2-d"));
        }
        let get = |key: &str| -> Result<NdArray> {
            NdArray::from_pickle(
                &field(key).ok_or_else(|| err(format!("csr_matrix without {key}")))?,
            )
        };
        let (values, indices, indptr) = (get("data")?, get("indices")?, get("indptr")?);
        if indptr.data.len() != shape[0] + 1 {
            return Err(err("csr indptr length does not match row count"));
        }
        let mut dense = vec![0.0; shape[0] * shape[1]];
        for row in 0..shape[0] {
            let (lo, hi) = (indptr.data[row] as usize, indptr.data[row + 1] as usize);
            if hi > values.data.len() || lo > hi {
                return Err(err("csr indptr out of range"));
            }
            for k in lo..hi {
                let col = indices.data[k] as usize;
                if col >= shape[1] {
                    return Err(err("csr column index out of range"));
                }
                dense[row * shape[1] + col] += values.data[k];
            }
        }
        Ok(NdArray { shape, data: dense })
    }

    /// Accepts either a dense ndarray or a CSR matrix.
    pub fn from_matrix_pickle(o: &Obj) -> Result<NdArray> {
        let is_csr = o
            .borrow()
            .class_name()
            .is_some_and(|(_, n)| n.starts_with("csr_"));
        if is_csr {
            Self::from_csr_pickle(o)
        } else {
            Self::from_pickle(o)
        }
    }
}

fn transpose(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Adjacency lists from a pickled `dict` or `defaultdict` of int lists.
pub fn adjacency_from_pickle(o: &Obj) -> Result<Vec<(usize, Vec<usize>)>> {
    let v = o.borrow();
    let pairs = match &*v {
        Value::Dict(items) | Value::Instance { items, .. } => items.clone(),
        other => {
            return Err(err(format!(
                "expected adjacency dict, found {}",
                kind(other)
            )))
        }
    };
    pairs
        .iter()
        .map(|(k, l)| {
            let key = int_of(k)? as usize;
            let list = match &*l.borrow() {
                Value::List(xs) | Value::Tuple(xs) | Value::Set(xs) => xs
                    .iter()
                    .map(|x| int_of(x).map(|i| i as usize))
                    .collect::<Result<Vec<_>>>()?,
                other => return Err(err(format!("adjacency value is {}", kind(other)))),
            };
            Ok((key, list))
        })
        .collect()
}
