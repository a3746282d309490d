/** Incremental parser for a text/event-stream byte stream.
 *
 * Feed it decoded chunks in any split; it emits complete events on the
 * blank-line dispatch boundary, ignoring comment lines (keepalives).
 */

export interface SseEvent {
  event: string;
  /** Raw data payload, exactly as sent (joined with "\n" if multi-line). */
  data: string;
  id?: string;
}

export class SseParser {
  private buffer = "";
  private eventType = "";
  private dataLines: string[] = [];
  private lastId: string | undefined;

  /** Parse a chunk; returns the events completed by it. */
  feed(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const out: SseEvent[] = [];
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) break;
      let line = this.buffer.slice(0, nl);
      this.buffer = this.buffer.slice(nl + 1);
      if (line.endsWith("\r")) line = line.slice(0, -1);
      const event = this.handleLine(line);
      if (event) out.push(event);
    }
    return out;
  }

  private handleLine(line: string): SseEvent | null {
    if (line === "") {
      if (this.dataLines.length === 0 && this.eventType === "") return null;
      const event: SseEvent = {
        event: this.eventType || "message",
        data: this.dataLines.join("\n"),
        id: this.lastId,
      };
      this.eventType = "";
      this.dataLines = [];
      return event;
    }
    if (line.startsWith(":")) return null; // comment / keepalive
    const colon = line.indexOf(":");
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    if (field === "event") this.eventType = value;
    else if (field === "data") this.dataLines.push(value);
    else if (field === "id") this.lastId = value;
    return null;
  }
}
