public class Main {
    static int largest(int[] values) {
        int m = values[0];
        for (int v : values) {
            if (v > m) m = v;
        }
        return m;
    }

    public static void main(String[] args) {
        int[] data = {3, 9, 4, 1};
        System.out.println("max " + largest(data));
    }
}
