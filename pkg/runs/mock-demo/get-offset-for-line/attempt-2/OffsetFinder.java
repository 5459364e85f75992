public class OffsetFinder {
    int getOffsetForLine(JTextArea textArea, int line) { return line * 4; }
}
