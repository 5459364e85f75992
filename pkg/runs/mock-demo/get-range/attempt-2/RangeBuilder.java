public class RangeBuilder {
    List<Integer> GetRange(int start, int end) { /* fixed */ return build(start, end); }
}
